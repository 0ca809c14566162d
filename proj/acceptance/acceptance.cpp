// Acceptance gate: one PASS/FAIL line per criterion, tolerances fixed below.

#include "sphcloud/sphcloud.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

using namespace sphcloud;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double deg(double rad) { return rad * 180.0 / kPi; }

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<void(Verdict&)>& body)
{
    Verdict v;
    const auto t0 = Clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.pass = false;
        v.detail << " [exception: " << e.what() << "]";
    }
    failures += !v.pass;
    std::printf("%s %2d %-28s %6.1fs %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), seconds_since(t0),
                v.detail.str().c_str());
    std::fflush(stdout);
}

// brute-force k nearest by distance, ties by id; the query itself comes first
std::vector<Index> brute_knn(std::span<const Vec3> pts, Index q, std::size_t k)
{
    std::vector<Index> ids(pts.size());
    std::iota(ids.begin(), ids.end(), Index{0});
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), [&](Index a, Index b) {
        const double da = (pts[a] - pts[q]).squaredNorm(), db = (pts[b] - pts[q]).squaredNorm();
        return da != db ? da < db : a < b;
    });
    ids.resize(k);
    return ids;
}

// pole spreads straight from the projection formulas
std::pair<double, double> recompute_spreads(std::span<const Vec3> cloud, std::span<const Vec3> f, std::size_t k)
{
    Index north = 0, south = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i].z() > f[north].z()) north = static_cast<Index>(i);
        if (f[i].z() < f[south].z()) south = static_cast<Index>(i);
    }
    auto pn = [](const Vec3& p) { return Complex(p.x(), p.y()) / (1.0 - p.z()); };
    auto ps = [](const Vec3& p) { return Complex(-p.x(), p.y()) / (1.0 + p.z()); };
    double dp = 0, ds = 0;
    for (Index j : brute_knn(cloud, north, k)) dp += std::abs(pn(f[j]) - pn(f[north]));
    for (Index j : brute_knn(cloud, south, k)) ds += std::abs(ps(f[j]) - ps(f[south]));
    return {dp / static_cast<double>(k), ds / static_cast<double>(k)};
}

SphericalMap shared_sphere_map;
std::vector<Vec3> shared_sphere_cloud;

}  // namespace

int main()
{
    std::printf("sphcloud acceptance, %u thread(s)\n", std::max(1u, std::thread::hardware_concurrency()));

    criterion(1, "disk conformal recovery", [](Verdict& v) {
        const auto t0 = Clock::now();
        const auto res = run_disk_experiment({});
        const double secs = seconds_since(t0);
        auto row = [&](WeightVariant w) {
            for (const auto& r : res.rows)
                if (r.weight == w) return r;
            throw Error(ErrorCode::InvalidInput, "missing weight row");
        };
        const auto p = row(WeightVariant::proposed), wl = row(WeightVariant::wendland),
                   ex = row(WeightVariant::exponential);
        v.detail << "n=" << res.points << " proposed mean=" << p.mean_error << " max=" << p.max_error
                 << " wendland mean=" << wl.mean_error << " gaussian mean=" << ex.mean_error << " time=" << secs << "s";
        v.require(p.mean_error <= 2e-3, "proposed mean <= 2e-3");
        v.require(p.max_error <= 5e-2, "proposed max <= 5e-2");
        v.require(p.mean_error <= wl.mean_error, "proposed mean <= wendland mean");
        v.require(p.mean_error <= ex.mean_error, "proposed mean <= gaussian mean");
        v.require(secs < 30.0, "runtime < 30 s");
    });

    criterion(2, "sphere identity 10k", [](Verdict& v) {
        shared_sphere_cloud = synth::sphere(10000, 0);
        const auto t0 = Clock::now();
        const PointCloud cloud(shared_sphere_cloud);
        shared_sphere_map = parameterize(cloud);
        const auto mesh = induce_mesh(cloud, shared_sphere_map);
        const auto q = angle_distortion(mesh.source, mesh.sphere);
        const double ratio = delaunay_ratio(mesh.source);
        const double secs = seconds_since(t0);
        v.detail << "mean|delta|=" << q.mean_abs_delta << "deg delaunay=" << ratio
                 << " iterations=" << shared_sphere_map.iterations << " time=" << secs << "s";
        v.require(q.mean_abs_delta < 2.0, "mean |delta| < 2 deg");
        v.require(ratio >= 0.99, "delaunay ratio >= 0.99");
        v.require(check_topology(mesh.source).is_closed_genus0(), "closed genus-0");
        v.require(secs < 180.0, "runtime < 3 min");
    });

    criterion(3, "blob suite", [](Verdict& v) {
        for (std::uint64_t seed : {0u, 1u, 2u}) {
            const PointCloud cloud(synth::blob(5000, seed));
            const auto map = parameterize(cloud);
            const auto mesh = induce_mesh(cloud, map);
            const auto topo = check_topology(mesh.source);
            const double ratio = delaunay_ratio(mesh.source);
            const double last = map.history.empty() ? 0.0 : map.history.back();
            v.detail << "seed" << seed << ": iters=" << map.iterations << " move=" << last << " chi=" << topo.euler
                     << " delaunay=" << ratio << "; ";
            const std::string tag = "seed " + std::to_string(seed);
            v.require(map.converged && map.iterations <= 100 && last < 1e-4, tag + " converges within 100");
            v.require(topo.closed && topo.euler == 2 && topo.oriented, tag + " closed, chi 2, oriented");
            v.require(ratio >= 0.97, tag + " delaunay ratio >= 0.97");
        }
    });

    criterion(4, "balancing exactness", [](Verdict& v) {
        auto check = [&](const std::string& tag, std::span<const Vec3> cloud_pts, std::span<const Vec3> f) {
            const PointCloud cloud(std::vector<Vec3>(cloud_pts.begin(), cloud_pts.end()));
            const std::size_t k = 25;
            const auto [dp0, ds0] = recompute_spreads(cloud.points(), f, k);
            const auto res = balance(f, cloud, k);
            const auto [dp1, ds1] = recompute_spreads(cloud.points(), res.images, k);
            const double equal = std::abs(dp1 - ds1) / std::max(dp1, ds1);
            const double product = std::abs(dp1 * ds1 - dp0 * ds0) / (dp0 * ds0);
            v.detail << tag << ": d_p/d_s before=" << dp0 / ds0 << " equal=" << equal << " product=" << product << "; ";
            v.require(equal <= 1e-9, tag + " spreads agree");
            v.require(product <= 1e-9, tag + " product preserved");
        };
        // unbalance the sphere map by a north-chart scale of 3
        std::vector<Vec3> scaled(shared_sphere_map.images.size());
        for (std::size_t i = 0; i < scaled.size(); ++i) {
            PlanePoint w = proj_north(shared_sphere_map.images[i]);
            if (w.is_finite()) w.value *= 3.0;
            scaled[i] = inv_north(w);
        }
        check("sphere x3", shared_sphere_cloud, scaled);
        const auto ell = synth::ellipsoid(3000, 2, 1, 1, 5);
        ParamConfig cfg;
        cfg.balance = false;
        const auto raw = parameterize(PointCloud(ell), cfg);
        check("ellipsoid raw", ell, raw.images);
    });

    criterion(5, "LB property suite", [](Verdict& v) {
        // polynomial exactness of the derivative rows, on real frames
        const PointCloud blob(synth::blob(3000, 2));
        const auto lb = assemble_lb_full(blob, 25, WeightVariant::proposed);
        synth::Rng rng(17);
        double poly_err = 0;
        for (std::size_t s = 0; s < blob.size(); s += 3) {
            std::array<double, 6> c;
            for (double& x : c) x = rng.uniform(-2, 2);
            std::vector<double> u;
            for (const auto& p : lb.frames[s].local_coords) {
                const double x = p.x(), y = p.y();
                u.push_back(c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y);
            }
            const auto d = lb.fits[s].derivatives(u);
            const std::array<double, 5> want{c[1], c[2], 2 * c[3], c[4], 2 * c[5]};
            for (int i = 0; i < 5; ++i) poly_err = std::max(poly_err, std::abs(d[i] - want[i]));
        }
        v.require(poly_err <= 1e-9, "polynomial exactness 1e-9");

        // constant annihilation, relative to the largest row l1 norm
        double scale = 0;
        for (std::size_t i = 0; i < lb.op.size(); ++i) {
            double s = 0;
            for (double x : lb.op.row(static_cast<Index>(i)).values) s += std::abs(x);
            scale = std::max(scale, s);
        }
        const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(blob.size()));
        const double annihilation = lb.op.apply(one).lpNorm<Eigen::Infinity>() / scale;
        v.require(annihilation <= 1e-8, "constant annihilation 1e-8");

        // flat grid paraboloid
        std::vector<Vec3> grid;
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) grid.emplace_back(0.05 * i, 0.05 * j, 0.0);
        const PointCloud flat(grid);
        const auto fop = assemble_lb(flat, 25, WeightVariant::proposed);
        Eigen::VectorXd r2(flat.size());
        for (std::size_t i = 0; i < flat.size(); ++i) r2[i] = flat[i].x() * flat[i].x() + flat[i].y() * flat[i].y();
        const double flat_err = (fop.apply(r2).array() - 4.0).abs().maxCoeff();
        v.require(flat_err <= 1e-4, "flat grid 4 +- 1e-4");

        // degree-1 harmonics on a 10k sphere
        const PointCloud sph(synth::sphere(10000, 0));
        const auto sop = assemble_lb(sph, 25, WeightVariant::proposed);
        double rq_lo = 0, rq_hi = -10;
        for (int axis = 0; axis < 3; ++axis) {
            Eigen::VectorXd u(sph.size());
            for (std::size_t i = 0; i < sph.size(); ++i) u[i] = sph[i][axis];
            const double rq = u.dot(sop.apply(u)) / u.dot(u);
            rq_lo = std::min(rq_lo, rq);
            rq_hi = std::max(rq_hi, rq);
        }
        v.require(rq_lo >= -2.4 && rq_hi <= -1.6, "rayleigh quotient in [-2.4, -1.6]");

        // frame invariance, every weight
        double inv_err = 0;
        for (auto w : {WeightVariant::proposed, WeightVariant::wendland, WeightVariant::exponential,
                       WeightVariant::special}) {
            const auto full = assemble_lb_full(blob, 25, w);
            for (std::size_t s = 0; s < blob.size(); s += 11) {
                const auto& f = full.frames[s];
                const SparseRow base = lb_row(full.fits[s]);
                double l1 = 0;
                for (double x : base.values) l1 += std::abs(x);
                Eigen::Matrix3d flipped;
                flipped << f.e1(), -f.e2(), -f.e3();
                const double th = 0.29 + 0.13 * static_cast<double>(s % 17);
                Eigen::Matrix3d rotated;
                rotated << std::cos(th) * f.e1() + std::sin(th) * f.e2(),
                    -std::sin(th) * f.e1() + std::cos(th) * f.e2(), f.e3();
                for (const auto* basis : {&flipped, &rotated}) {
                    const SparseRow other = lb_row(mls_fit(f.rebased(*basis, blob.points()), w));
                    if (other.columns != base.columns) {
                        inv_err = 1;
                        continue;
                    }
                    for (std::size_t j = 0; j < base.values.size(); ++j)
                        inv_err = std::max(inv_err, std::abs(other.values[j] - base.values[j]) / l1);
                }
            }
        }
        v.require(inv_err <= 1e-8, "flip and rotation invariance 1e-8");
        v.detail << "poly=" << poly_err << " const=" << annihilation << " flat=" << flat_err << " rq=[" << rq_lo
                 << ", " << rq_hi << "] invariance=" << inv_err;
    });

    criterion(6, "projection identities", [](Verdict& v) {
        synth::Rng rng(6);
        double plane_err = 0, sphere_err = 0, compose_err = 0;
        for (int t = 0; t < 10000; ++t) {
            const double r = std::pow(10.0, rng.uniform(-3, 3));
            const double th = rng.uniform(0, 2 * kPi);
            const Complex z = std::polar(r, th);
            const double rel = std::max(1.0, std::abs(z));
            plane_err = std::max(plane_err, std::abs(proj_north(inv_north(finite(z))).value - z) / rel);
            plane_err = std::max(plane_err, std::abs(proj_south(inv_south(finite(z))).value - z) / rel);
            const Vec3 p = rng.direction();
            sphere_err = std::max(sphere_err, (inv_north(proj_north(p)) - p).norm());
            sphere_err = std::max(sphere_err, (inv_south(proj_south(p)) - p).norm());
            const double m2 = std::norm(z);
            const Complex want(-z.real() / m2, z.imag() / m2);
            compose_err = std::max(compose_err,
                                   std::abs(proj_south(inv_north(finite(z))).value - want) / std::max(1.0, std::abs(want)));
        }
        v.detail << "plane=" << plane_err << " sphere=" << sphere_err << " composed=" << compose_err;
        v.require(plane_err <= 1e-12, "plane round trips");
        v.require(sphere_err <= 1e-12, "sphere round trips");
        v.require(compose_err <= 1e-12, "composed chart transition");
    });

    criterion(7, "hull empty halfspace", [](Verdict& v) {
        synth::Rng rng(7);
        std::size_t violations = 0, bad_topology = 0, faces_checked = 0;
        double worst = -1;
        for (int c = 0; c < 200; ++c) {
            const auto n = static_cast<std::size_t>(4 + rng.uniform() * 497);
            const auto pts = synth::sphere(n, 1000 + static_cast<std::uint64_t>(c));
            ConvexHull hull(pts, static_cast<std::uint64_t>(c));
            TriMesh m;
            m.vertices = pts;
            m.faces = hull.faces();
            const auto topo = check_topology(m);
            bad_topology += !(topo.closed && topo.oriented && topo.euler == 2);
            for (const auto& f : hull.faces()) {
                ++faces_checked;
                const Vec3 &a = pts[f[0]], &b = pts[f[1]], &cc = pts[f[2]];
                const Vec3 nrm = (b - a).cross(cc - a).normalized();
                for (std::size_t p = 0; p < pts.size(); ++p) {
                    if (static_cast<Index>(p) == f[0] || static_cast<Index>(p) == f[1] ||
                        static_cast<Index>(p) == f[2])
                        continue;
                    const double h = nrm.dot(pts[p] - a);
                    worst = std::max(worst, h);
                    violations += h > 1e-10;
                }
            }
        }
        v.detail << "faces=" << faces_checked << " violations=" << violations << " max height=" << worst
                 << " bad topology=" << bad_topology;
        v.require(violations == 0, "zero violations beyond 1e-10");
        v.require(bad_topology == 0, "every hull closed and oriented");
    });

    criterion(8, "multilevel counts", [](Verdict& v) {
        const SphereInterpolator interp(shared_sphere_cloud, shared_sphere_map);
        const auto levels = multilevel(interp, 4, 3);
        const std::array<std::size_t, 5> want{642, 2562, 10242, 40962, 163842};
        v.require(levels.size() == want.size(), "five levels");
        for (std::size_t l = 0; l < levels.size() && l < want.size(); ++l) {
            const auto topo = check_topology(levels[l]);
            v.detail << levels[l].vertices.size() << (l + 1 < levels.size() ? "/" : "");
            v.require(levels[l].vertices.size() == want[l], "level " + std::to_string(l) + " count");
            v.require(topo.closed && topo.euler == 2, "level " + std::to_string(l) + " closed, chi 2");
        }
    });

    criterion(9, "punched holes", [](Verdict& v) {
        const auto pts = synth::punch_holes(synth::sphere(10000, 9), 50, 0.15, 9);
        const PointCloud cloud(pts);
        const auto map = parameterize(cloud);
        const auto mesh = induce_mesh(cloud, map);
        const auto topo = check_topology(mesh.source);
        v.detail << "points=" << pts.size() << " faces=" << topo.faces << " chi=" << topo.euler
                 << " iterations=" << map.iterations;
        v.require(topo.is_closed_genus0(), "closed genus-0");
        v.require(topo.all_vertices_used && mesh.source.vertices.size() == pts.size(), "covers every point");
    });

    criterion(10, "quad mesh angles", [](Verdict& v) {
        auto range = [](const QuadMesh& q) {
            std::pair<double, double> r{180, 0};
            for (const auto& f : q.faces)
                for (int c = 0; c < 4; ++c) {
                    const double a =
                        deg(corner_angle(q.vertices[f[c]], q.vertices[f[(c + 1) % 4]], q.vertices[f[(c + 3) % 4]]));
                    r.first = std::min(r.first, a);
                    r.second = std::max(r.second, a);
                }
            return r;
        };
        // the computed map of the 10k sphere decides; the exact identity map is printed for reference
        const SphereInterpolator interp(shared_sphere_cloud, shared_sphere_map);
        const auto q = quad_mesh(interp, 16);
        const auto [lo, hi] = range(q);
        SphericalMap exact;
        exact.images = shared_sphere_cloud;
        const auto [ilo, ihi] = range(quad_mesh(SphereInterpolator(shared_sphere_cloud, exact), 16));
        const auto [tlo, thi] = range(cube_sphere(16));
        const auto topo = check_topology(q);
        v.detail << "quads=" << q.faces.size() << " angles=[" << lo << ", " << hi << "]"
                 << " identity map=[" << ilo << ", " << ihi << "] template=[" << tlo << ", " << thi << "]";
        v.require(topo.is_closed_genus0(), "closed");
        v.require(lo >= 60.0 && hi <= 120.0, "corner angles in [60, 120]");
    });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
