#include "sphcloud/io.hpp"
#include "sphcloud/meshing.hpp"
#include "sphcloud/synth.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

using namespace sphcloud;
namespace fs = std::filesystem;

namespace
{

class IoTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("sphcloud_io_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path file(const std::string& name, const std::string& content = {}) const
    {
        fs::path p = dir_ / name;
        if (!content.empty()) std::ofstream(p, std::ios::binary) << content;
        return p;
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static std::vector<std::string> lines_starting(const fs::path& p, const std::string& prefix)
    {
        std::vector<std::string> out;
        std::istringstream in(slurp(p));
        for (std::string l; std::getline(in, l);)
            if (l.rfind(prefix, 0) == 0) out.push_back(l);
        return out;
    }

    fs::path dir_;
};

struct Failure {
    ErrorCode code;
    std::string what;
};

std::optional<Failure> failure_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return Failure{e.code(), e.what()};
    }
    return std::nullopt;
}

template <class T>
void put(std::string& buf, T v)
{
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

}  // namespace

TEST_F(IoTest, XyzWithCommentsAndBlankLines)
{
    auto p = file("c.xyz", "# scanner export\n# units: mm\n\n0 0 0\n1 0 0  # trailing note\n0 1 0\n# last\n0 0 1\n");
    auto cloud = io::read_cloud(p);
    ASSERT_EQ(cloud.size(), 4u);
    EXPECT_EQ(cloud[1], Vec3(1, 0, 0));
    EXPECT_EQ(cloud[3], Vec3(0, 0, 1));
}

TEST_F(IoTest, XyzErrorsCarryLineNumbers)
{
    auto bad = failure_of([&] { (void)io::read_cloud(file("a.xyz", "0 0 0\n1 0 0\n0 1 zero\n0 0 1\n")); });
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->code, ErrorCode::Io);
    EXPECT_NE(bad->what.find("a.xyz:3:"), std::string::npos) << bad->what;

    auto fields = failure_of([&] { (void)io::read_cloud(file("b.xyz", "0 0 0\n1 0\n")); });
    ASSERT_TRUE(fields);
    EXPECT_NE(fields->what.find("b.xyz:2:"), std::string::npos) << fields->what;

    auto dup = failure_of([&] { (void)io::read_cloud(file("d.xyz", "# h\n0 0 0\n1 0 0\n0 1 0\n\n1 0 0\n0 0 1\n")); });
    ASSERT_TRUE(dup);
    EXPECT_EQ(dup->code, ErrorCode::DuplicatePoint);
    EXPECT_NE(dup->what.find("lines 3 and 6"), std::string::npos) << dup->what;

    auto few = failure_of([&] { (void)io::read_cloud(file("f.xyz", "0 0 0\n1 0 0\n0 1 0\n")); });
    ASSERT_TRUE(few);
    EXPECT_EQ(few->code, ErrorCode::InsufficientPoints);

    auto nan = failure_of([&] { (void)io::read_cloud(file("n.xyz", "0 0 0\n1 0 0\n0 1 0\nnan 0 1\n")); });
    ASSERT_TRUE(nan);

    auto missing = failure_of([&] { (void)io::read_cloud(dir_ / "absent.xyz"); });
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->code, ErrorCode::Io);
}

TEST_F(IoTest, BinaryPlyWithNormals)
{
    auto pts = synth::sphere(10000, 3);
    std::string buf = "ply\nformat binary_little_endian 1.0\ncomment made by a test\nelement vertex 10000\n"
                      "property float x\nproperty float y\nproperty float z\n"
                      "property float nx\nproperty float ny\nproperty float nz\nproperty uchar quality\nend_header\n";
    for (const auto& p : pts) {
        for (int i = 0; i < 3; ++i) put(buf, static_cast<float>(p[i]));
        for (int i = 0; i < 3; ++i) put(buf, static_cast<float>(p[i]));
        put(buf, std::uint8_t{7});
    }
    auto cloud = io::read_cloud(file("s.ply", buf));
    ASSERT_EQ(cloud.size(), 10000u);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int c = 0; c < 3; ++c) ASSERT_EQ(cloud[i][c], static_cast<double>(static_cast<float>(pts[i][c])));
}

TEST_F(IoTest, AsciiPlyAndBinaryDuplicates)
{
    auto ascii = io::read_cloud(file("a.ply", "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\n"
                                              "property double y\nproperty double z\nelement face 1\n"
                                              "property list uchar int vertex_indices\nend_header\n"
                                              "0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n"));
    EXPECT_EQ(ascii.size(), 4u);

    std::string buf = "ply\nformat binary_little_endian 1.0\nelement vertex 5\nproperty double x\n"
                      "property double y\nproperty double z\nend_header\n";
    for (double v : {0., 0., 0., 1., 0., 0., 0., 1., 0., 1., 0., 0., 0., 0., 1.}) put(buf, v);
    auto dup = failure_of([&] { (void)io::read_cloud(file("d.ply", buf)); });
    ASSERT_TRUE(dup);
    EXPECT_EQ(dup->code, ErrorCode::DuplicatePoint);
    EXPECT_NE(dup->what.find("vertex records 1 and 3"), std::string::npos) << dup->what;

    std::string cut = "ply\nformat binary_little_endian 1.0\nelement vertex 5\nproperty double x\n"
                      "property double y\nproperty double z\nend_header\n";
    put(cut, 1.0);
    EXPECT_TRUE(failure_of([&] { (void)io::read_cloud(file("t.ply", cut)); }));
    EXPECT_TRUE(failure_of([&] { (void)io::read_cloud(file("h.ply", "ply\nformat ascii 1.0\nelement vertex 4\n")); }));
}

TEST_F(IoTest, ObjCloudIgnoresFacesWithWarning)
{
    std::vector<std::string> warnings;
    auto cloud = io::read_cloud(file("m.obj", "# mesh\nv 0 0 0\nv 1 0 0\nvn 0 0 1\nv 0 1 0\nv 0 0 1 1.0\n"
                                              "f 1 2 3\nf 1 3 4\nf 1 4 2\nf 2 4 3\n"),
                                &warnings);
    EXPECT_EQ(cloud.size(), 4u);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("ignored 4 face lines"), std::string::npos);
}

TEST_F(IoTest, TetrahedronObjLayout)
{
    std::vector<Vec3> tet{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    for (auto& p : tet) p.normalize();
    auto mesh = spherical_delaunay(tet);
    auto p = file("tet.obj");
    io::write_mesh(mesh, p);
    auto v = lines_starting(p, "v ");
    auto f = lines_starting(p, "f ");
    EXPECT_EQ(v.size(), 4u);
    ASSERT_EQ(f.size(), 4u);
    // one-based indices
    for (const auto& line : f) {
        std::istringstream in(line.substr(2));
        int a, b, c;
        in >> a >> b >> c;
        for (int x : {a, b, c}) EXPECT_TRUE(x >= 1 && x <= 4) << line;
    }
    auto back = io::read_mesh<3>(p);
    EXPECT_EQ(back.faces, mesh.faces);
    EXPECT_EQ(back.vertices, mesh.vertices);
}

TEST_F(IoTest, CubeSphereQuadObj)
{
    auto q = cube_sphere(1);
    auto p = file("cube.obj");
    io::write_mesh(q, p);
    EXPECT_EQ(lines_starting(p, "v ").size(), 8u);
    auto f = lines_starting(p, "f ");
    ASSERT_EQ(f.size(), 6u);
    for (const auto& line : f) EXPECT_EQ(io::detail::tokens(line).size(), 5u) << line;
    auto back = io::read_mesh<4>(p);
    EXPECT_EQ(back.faces, q.faces);
    EXPECT_EQ(back.vertices, q.vertices);
}

TEST_F(IoTest, MeshRoundTripsBitExactInBothFormats)
{
    auto m = icosphere(2);
    synth::Rng rng(2);
    for (auto& v : m.vertices) v *= rng.uniform(0.5, 2.0);  // arbitrary doubles, not just unit vectors
    for (const char* name : {"m.obj", "m.ply"}) {
        auto p = file(name);
        io::write_mesh(m, p);
        auto back = io::read_mesh<3>(p);
        EXPECT_EQ(back.vertices, m.vertices) << name;
        EXPECT_EQ(back.faces, m.faces) << name;
    }
    auto q = cube_sphere(3);
    io::write_mesh(q, file("q.ply"));
    EXPECT_EQ(io::read_mesh<4>(file("q.ply")).faces, q.faces);
    // the PLY writer output is also a readable cloud
    EXPECT_EQ(io::read_cloud(file("m.ply")).size(), m.vertices.size());
}

TEST_F(IoTest, ObjFaceTokenVariants)
{
    auto mesh = io::read_mesh<3>(file("v.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvt 0 0\n"
                                               "f 1/1 2/1 3/1\nf 1//1 3//1 4//1\nf -4 -1 -3\n"));
    ASSERT_EQ(mesh.faces.size(), 3u);
    EXPECT_EQ(mesh.faces[0], (Triangle{0, 1, 2}));
    EXPECT_EQ(mesh.faces[1], (Triangle{0, 2, 3}));
    EXPECT_EQ(mesh.faces[2], (Triangle{0, 3, 1}));

    auto quad = failure_of([&] { (void)io::read_mesh<3>(file("q.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n")); });
    ASSERT_TRUE(quad);
    EXPECT_NE(quad->what.find("q.obj:5:"), std::string::npos) << quad->what;
    EXPECT_TRUE(failure_of([&] { (void)io::read_mesh<3>(file("r.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")); }));
    EXPECT_TRUE(failure_of([&] { (void)io::read_mesh<3>(file("z.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")); }));
}

TEST_F(IoTest, XyzRoundTripIsBitExact)
{
    auto pts = synth::blob(500, 1);
    auto p = file("b.xyz");
    io::write_xyz(pts, p);
    auto back = io::read_cloud(p);
    ASSERT_EQ(back.size(), pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) ASSERT_EQ(back[i], pts[i]);
}

TEST_F(IoTest, MapSidecarRoundTripAndValidation)
{
    SphericalMap map;
    map.images = synth::sphere(300, 5);
    auto p = file("map.txt");
    io::write_map(map, p);
    EXPECT_EQ(io::read_map(p), map.images);

    // rows in any order are accepted
    auto shuffled = file("shuffled.txt", "1 0 1 0\n0 1 0 0\n2 0 0 1\n");
    auto img = io::read_map(shuffled);
    EXPECT_EQ(img[0], Vec3(1, 0, 0));
    EXPECT_EQ(img[1], Vec3(0, 1, 0));

    EXPECT_TRUE(failure_of([&] { (void)io::read_map(file("gap.txt", "0 1 0 0\n2 0 1 0\n")); }));
    EXPECT_TRUE(failure_of([&] { (void)io::read_map(file("twice.txt", "0 1 0 0\n0 0 1 0\n")); }));
    auto off = failure_of([&] { (void)io::read_map(file("off.txt", "0 1 0 0\n1 0 2 0\n")); });
    ASSERT_TRUE(off);
    EXPECT_NE(off->what.find("off.txt:2:"), std::string::npos) << off->what;
    EXPECT_TRUE(failure_of([&] { (void)io::read_map(file("short.txt", "0 1 0\n")); }));
}

TEST_F(IoTest, FormatByExtension)
{
    EXPECT_EQ(io::cloud_format_of("a.PLY"), io::CloudFormat::ply);
    EXPECT_EQ(io::cloud_format_of("a.obj"), io::CloudFormat::obj);
    EXPECT_EQ(io::cloud_format_of("a.txt"), io::CloudFormat::xyz);
    EXPECT_EQ(io::mesh_format_of("a.ply"), io::MeshFormat::ply);
    EXPECT_EQ(io::mesh_format_of("a.off"), io::MeshFormat::obj);
}

TEST_F(IoTest, UnwritablePathIsAnIoError)
{
    auto bad = failure_of([&] { io::write_xyz(synth::sphere(10, 1), dir_ / "no" / "such" / "dir.xyz"); });
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->code, ErrorCode::Io);
}
