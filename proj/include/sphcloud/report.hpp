#pragma once

#include "sphcloud/disk_experiment.hpp"
#include "sphcloud/mesh.hpp"
#include "sphcloud/meshing.hpp"
#include "sphcloud/sphere_param.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

/** JSON views of run results, as written next to CLI outputs. */
namespace sphcloud::report
{

using Json = nlohmann::ordered_json;

inline Json config_json(const ParamConfig& cfg)
{
    return Json{{"k", cfg.k},
                {"r_percent", cfg.r_percent},
                {"epsilon", cfg.epsilon},
                {"weight", std::string(to_string(cfg.weight))},
                {"max_ns_iters", cfg.max_ns_iters},
                {"solver", cfg.solver.kind == SolverKind::direct ? "direct" : "iterative"},
                {"balance", cfg.balance}};
}

inline Json map_json(const SphericalMap& map, const ParamConfig& cfg)
{
    Json j = config_json(cfg);
    j["points"] = map.size();
    j["iterations"] = map.iterations;
    j["converged"] = map.converged;
    j["movement_history"] = map.history;
    j["triple"] = map.triple;
    j["mirrored"] = map.mirrored;
    j["balance"] = Json{{"north", map.balance.north},   {"south", map.balance.south},
                        {"d_p", map.balance.d_p},       {"d_s", map.balance.d_s},
                        {"lambda", map.balance.lambda}, {"d_p_after", map.balance.d_p_after},
                        {"d_s_after", map.balance.d_s_after}};
    Json stages = Json::object();
    for (const auto& [name, seconds] : map.stage_seconds) stages[name] = seconds;
    j["stage_seconds"] = stages;
    return j;
}

inline Json topology_json(const TopologyReport& t)
{
    return Json{{"vertices", t.vertices}, {"edges", t.edges},       {"faces", t.faces},
                {"euler", t.euler},       {"closed", t.closed},     {"oriented", t.oriented},
                {"genus0", t.is_closed_genus0()}};
}

/** Summary statistics only; per-corner values stay out of the report. */
inline Json quality_json(const QualityReport& q)
{
    Json j{{"corners", q.angle_diffs.size()},
           {"mean_abs_delta", q.mean_abs_delta},
           {"sd_abs_delta", q.sd_abs_delta},
           {"max_abs_delta", q.max_abs_delta},
           {"delaunay_ratio", q.delaunay_ratio}};
    if (!q.mean_curvature.empty()) {
        double lo = q.mean_curvature.front(), hi = lo, sum = 0;
        for (double h : q.mean_curvature) {
            lo = std::min(lo, h);
            hi = std::max(hi, h);
            sum += h;
        }
        j["mean_curvature"] = Json{{"min", lo}, {"max", hi}, {"mean", sum / double(q.mean_curvature.size())}};
    }
    return j;
}

inline Json disk_json(const DiskExperimentResult& r, const DiskExperimentConfig& cfg)
{
    Json rows = Json::array();
    for (const auto& row : r.rows)
        rows.push_back(Json{{"weight", std::string(to_string(row.weight))},
                            {"max_error", row.max_error},
                            {"mean_error", row.mean_error},
                            {"seconds", row.seconds}});
    return Json{{"points", r.points},   {"boundary", r.boundary}, {"seed", cfg.seed},
                {"k", cfg.k},           {"a_re", cfg.a.real()},   {"a_im", cfg.a.imag()},
                {"rows", std::move(rows)}};
}

inline void write_json(const Json& j, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

}  // namespace sphcloud::report
