#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "lightator/image.hpp"
#include "support.hpp"

using namespace lightator;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int rc = 0;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& sub) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = fs::temp_directory_path() / ("lightator_cli_" + std::string(info->name())) / sub;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Outcome cli(const std::string& args) {
    const auto dir = scratch("io");
    const auto out = dir / "stdout";
    const auto err = dir / "stderr";
    const std::string cmd =
        std::string("\"") + LIGHTATOR_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    o.err = slurp(err);
    return o;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

// Set LIGHTATOR_UPDATE_GOLDEN=1 to rewrite the golden files from the current output.
void expect_golden(const std::string& name, const std::string& actual) {
    const fs::path golden = fs::path(LIGHTATOR_GOLDEN_DIR) / name;
    if (std::getenv("LIGHTATOR_UPDATE_GOLDEN")) {
        std::ofstream(golden, std::ios::binary) << actual;
        return;
    }
    ASSERT_TRUE(fs::exists(golden)) << golden;
    EXPECT_EQ(actual, slurp(golden)) << "golden " << name;
}

fs::path image_path(const std::string& name) { return testkit::fixture_dir() / "images" / name; }

}  // namespace

TEST(Cli, MapGolden) {
    const auto o = cli("map " + quoted(testkit::fixture("lenet-like")));
    ASSERT_EQ(o.rc, 0) << o.err;
    expect_golden("map_lenet.json", o.out);
    const auto j = json::parse(o.out);
    EXPECT_EQ(j["layers"][0]["strides_per_bank"], 6);
    EXPECT_EQ(j["layers"][0]["arms_per_stride"], 1);
}

TEST(Cli, MapLongKernel) {
    const auto o = cli("map " + quoted(testkit::fixture("k7")));
    ASSERT_EQ(o.rc, 0) << o.err;
    const auto j = json::parse(o.out);
    EXPECT_EQ(j["layers"][0]["unused_mrs"], 5);
    EXPECT_EQ(j["layers"][0]["summation"], "stage1and2");
    EXPECT_EQ(j["layers"][0]["arms_per_stride"], 6);
}

TEST(Cli, PowerGoldens) {
    const auto cfg = quoted(testkit::config_dir() / "paper-calibration.cfg");
    const auto manifest = quoted(testkit::fixture("vgg9-like"));
    const auto js = cli("power " + manifest + " --precision 3 --config " + cfg);
    ASSERT_EQ(js.rc, 0) << js.err;
    expect_golden("power_vgg9_3b.json", js.out);
    const auto csv = cli("power " + manifest + " --precision 3 --csv --config " + cfg);
    ASSERT_EQ(csv.rc, 0) << csv.err;
    expect_golden("power_vgg9_3b.csv", csv.out);
    EXPECT_EQ(csv.out.rfind("layer,kind,component,watts\n", 0), 0u);
}

TEST(Cli, CalibratePoints) {
    const auto o = cli("calibrate --point 4:5.28 --point 3:2.71 --predict 2");
    ASSERT_EQ(o.rc, 0) << o.err;
    expect_golden("calibrate_points.json", o.out);
    const auto j = json::parse(o.out);
    EXPECT_DOUBLE_EQ(j["alpha"].get<double>(), 0.32125);
    EXPECT_DOUBLE_EQ(j["beta"].get<double>(), 0.46125);
    EXPECT_DOUBLE_EQ(j["predictions"]["2"].get<double>(), 1.425);
}

TEST(Cli, CalibrateFitReproducesShippedProfile) {
    const auto o = cli("calibrate --fit " + quoted(testkit::fixture("vgg9-like")));
    ASSERT_EQ(o.rc, 0) << o.err;
    EXPECT_EQ(o.out, slurp(testkit::config_dir() / "paper-calibration.cfg"));
}

TEST(Cli, CompressWhiteFrame) {
    const auto dir = scratch("work");
    const auto out = dir / "white.pgm";
    const auto o = cli("compress " + quoted(image_path("white4.ppm")) + " --pool 2x2 -o " + quoted(out));
    ASSERT_EQ(o.rc, 0) << o.err;
    const auto f = image::load_image(out);
    EXPECT_EQ(f.dims, (netir::Dims{2, 2, 1}));
    for (auto v : f.source) EXPECT_EQ(v, 255);
    const auto side = json::parse(slurp(out.string() + ".json"));
    EXPECT_EQ(side["path"], "reference");
    EXPECT_EQ(side["output_dims"]["h"], 2);
}

TEST(Cli, CompressGolden) {
    const auto dir = scratch("work");
    const auto out = dir / "scene.pgm";
    const auto o = cli("compress " + quoted(image_path("scene32.ppm")) + " --pool 2x2 --path optical -o " + quoted(out));
    ASSERT_EQ(o.rc, 0) << o.err;
    expect_golden("compress_scene32.pgm", slurp(out));
    expect_golden("compress_scene32.pgm.json", slurp(out.string() + ".json"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("work");
    std::ofstream(dir / "manifest.json") << "{broken";
    auto o = cli("map " + quoted(dir / "manifest.json"));
    EXPECT_EQ(o.rc, 3);
    EXPECT_FALSE(o.err.empty());
    EXPECT_TRUE(o.out.empty());

    o = cli("map " + quoted(dir / "absent.json"));
    EXPECT_EQ(o.rc, 3);
    EXPECT_FALSE(o.err.empty());

    o = cli("map");
    EXPECT_EQ(o.rc, 2);
    o = cli("calibrate --point 4:5.28");
    EXPECT_EQ(o.rc, 2);
    o = cli("power " + quoted(testkit::fixture("vgg9-like")) + " --compress 2x2");
    EXPECT_EQ(o.rc, 4);
    EXPECT_FALSE(o.err.empty());
}

TEST(Cli, RunReportsEveryFrame) {
    const auto o = cli("run " + quoted(testkit::fixture("lenet-like")) + " " + quoted(image_path("digit7.pgm")) + " " +
                       quoted(image_path("digit7.pgm")));
    ASSERT_EQ(o.rc, 0) << o.err;
    const auto j = json::parse(o.out);
    ASSERT_EQ(j["frames"].size(), 2u);
    EXPECT_EQ(j["frames"][0]["output"], j["frames"][1]["output"]);
    EXPECT_EQ(j["frames"][0]["output"].size(), 10u);
}
