#pragma once

// Umbrella header: the whole library in one include.

#include "sphcloud/common.hpp"
#include "sphcloud/disk_experiment.hpp"
#include "sphcloud/hull.hpp"
#include "sphcloud/io.hpp"
#include "sphcloud/mesh.hpp"
#include "sphcloud/meshing.hpp"
#include "sphcloud/mls.hpp"
#include "sphcloud/pointcloud.hpp"
#include "sphcloud/projection.hpp"
#include "sphcloud/report.hpp"
#include "sphcloud/solve.hpp"
#include "sphcloud/sphere_map.hpp"
#include "sphcloud/sphere_param.hpp"
#include "sphcloud/synth.hpp"
