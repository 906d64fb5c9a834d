#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ws3d/kitti_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "ws3d_cli_test";

int run(const std::string& args, const std::string& capture = "") {
    std::string cmd = std::string(WS3D_CLI) + " " + args;
    cmd += capture.empty() ? " >/dev/null 2>&1" : " >" + capture + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
    }
    static void TearDownTestSuite() { fs::remove_all(kRoot); }
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("eval --pred /definitely/missing --gt /definitely/missing"), 2);
    EXPECT_EQ(run("synth"), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, RuntimeErrorsExitOne) {
    const auto empty = kRoot / "empty";
    fs::create_directories(empty);
    const auto log = (kRoot / "err.txt").string();
    EXPECT_EQ(run("train-stage1 --scenes " + empty.string() + " --out " + (kRoot / "x.ckpt").string(), log), 1);
    EXPECT_NE(slurp(log).find("error:"), std::string::npos);
}

TEST_F(Cli, PipelineSmoke) {
    const auto d = kRoot / "data";
    const auto s1 = kRoot / "s1.ckpt";
    const auto s2 = kRoot / "s2.ckpt";
    ASSERT_EQ(run("synth --out " + d.string() + " --scenes 3 --seed 5"), 0);
    EXPECT_TRUE(fs::exists(d / "velodyne" / "000002.bin"));
    EXPECT_TRUE(fs::exists(d / "clicks" / "000000.txt"));

    ASSERT_EQ(run("train-stage1 --scenes " + d.string() + " --out " + s1.string() + " --iterations 2 --batch 1"), 0);
    const std::string log = slurp(s1.string() + ".loss.log");
    // one averaged record per interval, the last one flushed at the final step
    EXPECT_EQ(log.rfind("2 stage1 total=", 0), 0u) << log;
    ASSERT_EQ(run("train-stage2 --scenes " + d.string() + " --stage1 " + s1.string() + " --out " + s2.string() +
                  " --iterations 2 --batch 2"),
              0);
    EXPECT_NE(slurp(s2.string() + ".loss.log").find(" refine total="), std::string::npos);

    const auto pred = kRoot / "pred";
    ASSERT_EQ(run("infer --scenes " + d.string() + " --stage1 " + s1.string() + " --stage2 " + s2.string() +
                  " --out " + pred.string()),
              0);
    for (const char* id : {"000000", "000001", "000002"}) {
        const auto recs = ws3d::kitti::read_labels(pred / (std::string(id) + ".txt"));
        for (const auto& r : recs) {
            EXPECT_EQ(r.cls, "Car");
            EXPECT_TRUE(r.score.has_value());
        }
    }
    const auto aut = kRoot / "auto";
    ASSERT_EQ(run("annotate-auto --scenes " + d.string() + " --stage1 " + s1.string() + " --stage2 " + s2.string() +
                  " --out " + aut.string() + " --min-confidence 0.0"),
              0);
    for (const auto& r : ws3d::kitti::read_labels(aut / "000000.txt")) EXPECT_FALSE(r.score.has_value());

    // groundtruth scored against itself
    const auto out = (kRoot / "eval.txt").string();
    ASSERT_EQ(run("eval --pred " + (d / "label_2").string() + " --gt " + (d / "label_2").string() +
                      " --difficulty points --scenes " + d.string() + " --records",
                  out),
              0);
    EXPECT_NE(slurp(out).find("kind=3d regime=moderate iou=0.70 protocol=11 ap=1.000000"), std::string::npos)
        << slurp(out);
}
