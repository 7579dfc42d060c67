// Drives the built sgfem binary through a shell and checks exit codes and
// artifacts.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string("SGFEM_PRESETS='") + SGFEM_PRESET_SOURCE + "' '" + SGFEM_CLI_PATH + "' " +
                            args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, {}};
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("sgfem_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const char* kTiny = "--set field.M=2 --set disc.levels=2 --set disc.degree=1";

} // namespace

TEST(Cli, ListPresetsShowsShippedFiles) {
    const auto r = run("list-presets");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("table1-scaled"), std::string::npos);
    EXPECT_NE(r.out.find("table6-alpha0.4"), std::string::npos);
}

TEST(Cli, ValidateAcceptsPresetAndListsViolations) {
    const auto ok = run("validate --preset default");
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(ok.out, "ok\n");
    const auto bad = run("validate --preset default --set field.sigma=-1 --set disc.levels=20 --set bogus=1");
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("field.sigma"), std::string::npos);
    EXPECT_NE(bad.out.find("disc.levels"), std::string::npos);
    EXPECT_NE(bad.out.find("bogus"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
    const auto d = scratch("cfg");
    EXPECT_EQ(run("run --preset no-such-preset --out '" + d.string() + "'").code, 2);
    std::ofstream(d / "broken.cfg") << "model = exp\nnot a pair\n";
    EXPECT_EQ(run("run --config '" + (d / "broken.cfg").string() + "' --out '" + d.string() + "'").code, 2);
    EXPECT_EQ(run("run --set field.M=0 --out '" + d.string() + "'").code, 2);
    fs::remove_all(d);
}

TEST(Cli, UsageErrorIsNonZero) {
    EXPECT_NE(run("").code, 0);
    EXPECT_NE(run("frobnicate").code, 0);
}

TEST(Cli, RunWritesArtifactsAndRerunIsBitIdentical) {
    const auto a = scratch("a"), b = scratch("b");
    ASSERT_EQ(run(std::string("run ") + kTiny + " --out '" + a.string() + "'").code, 0);
    ASSERT_EQ(run(std::string("run ") + kTiny + " --out '" + b.string() + "'").code, 0);
    ASSERT_TRUE(fs::exists(a / "run.json"));
    ASSERT_TRUE(fs::exists(a / "table.csv"));
    EXPECT_EQ(slurp(a / "table.csv"), slurp(b / "table.csv"));
    EXPECT_FALSE(slurp(a / "table.csv").empty());
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, AdaptiveRunWritesTrace) {
    const auto d = scratch("adapt");
    const auto r = run("run --set experiment=adaptive --set model=square --set field.kind=cosine "
                       "--set field.alpha_bar=0.6 --set field.M=3 --set adaptive.epsilon=5e-2 "
                       "--set adaptive.max_iterations=3 --out '" + d.string() + "'");
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(fs::exists(d / "trace.csv"));
    fs::remove_all(d);
}
