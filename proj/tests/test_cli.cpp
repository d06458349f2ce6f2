#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "qbsde/serialization.hpp"

using namespace qbsde::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = QBSDE_CONFIG_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

template <class Fn>
Run capture(Fn&& fn) {
    std::ostringstream out, err;
    const int code = fn(out, err);
    return {code, out.str(), err.str()};
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST(Certify, ExitCodes) {
    auto r = capture([](auto& o, auto& e) { return cmd_certify(kConfigs / "theorem_grade.json", {}, o, e); });
    EXPECT_EQ(r.code, kOk);
    const auto j = qbsde::Json::parse(r.out);
    EXPECT_TRUE(j["existence_gate"].get<bool>());

    r = capture([](auto& o, auto& e) { return cmd_certify(kConfigs / "theorem_boundary.json", {}, o, e); });
    EXPECT_EQ(r.code, kNotCertified);

    CertifyFlags forced;
    forced.force_delta = 0.5;
    r = capture([&](auto& o, auto& e) { return cmd_certify(kConfigs / "ledger_example.json", forced, o, e); });
    EXPECT_EQ(r.code, kNotCertified);
    EXPECT_NEAR(qbsde::Json::parse(r.out)["C6"].get<double>(), 0.217841, 1e-6);
    EXPECT_NE(r.err.find("not certified"), std::string::npos);
}

TEST(Certify, ConfigErrors) {
    auto r = capture([](auto& o, auto& e) { return cmd_certify("/no/such/file.json", {}, o, e); });
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("config error"), std::string::npos);

    const auto bad = temp_file("qbsde_bad.json");
    std::ofstream(bad) << R"({"d": 1, "k": 1, "T": 1, "C1": 1, "C2": 0, "C4": 0,
        "terminal": {"kind": "cosine", "scale": 1}, "generator": {"kind": "zero"}})";
    r = capture([&](auto& o, auto& e) { return cmd_certify(bad, {}, o, e); });
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("C3"), std::string::npos);

    CertifyFlags flags;
    flags.lambda_grid = 0;
    r = capture([&](auto& o, auto& e) { return cmd_certify(kConfigs / "theorem_grade.json", flags, o, e); });
    EXPECT_EQ(r.code, kConfigError);
    fs::remove(bad);
}

TEST(Solve, DeterministicReportAndTrace) {
    SolveFlags f;
    f.paths = 3000;
    f.steps = 8;
    f.trace_path = temp_file("qbsde_cli_trace.csv");
    const auto a = capture([&](auto& o, auto& e) { return cmd_solve(kConfigs / "tanh_cos.json", f, o, e); });
    const auto b = capture([&](auto& o, auto& e) { return cmd_solve(kConfigs / "tanh_cos.json", f, o, e); });
    EXPECT_EQ(a.code, kOk);
    EXPECT_EQ(a.out, b.out);
    ASSERT_TRUE(fs::exists(*f.trace_path));
    std::ifstream csv(*f.trace_path);
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "iter,dist_y,dist_z,ratio,clip_events");
    fs::remove(*f.trace_path);

    f.seed = 8;
    const auto c = capture([&](auto& o, auto& e) { return cmd_solve(kConfigs / "tanh_cos.json", f, o, e); });
    EXPECT_NE(a.out, c.out);
}

TEST(Solve, NonConvergenceExitsFour) {
    auto j = qbsde::Json::parse(std::ifstream(kConfigs / "tanh_cos.json"));
    j["solver"]["max_iter"] = 1;
    const auto cfg = temp_file("qbsde_one_iter.json");
    std::ofstream(cfg) << j.dump();
    SolveFlags f;
    f.paths = 2000;
    f.steps = 5;
    f.trace_path = temp_file("qbsde_one_iter.trace.csv");
    const auto r = capture([&](auto& o, auto& e) { return cmd_solve(cfg, f, o, e); });
    EXPECT_EQ(r.code, kNotConverged);
    EXPECT_FALSE(qbsde::Json::parse(r.out)["converged"].get<bool>());
    fs::remove(cfg);
    fs::remove(*f.trace_path);
}

TEST(Solve, BadModeIsConfigError) {
    SolveFlags f;
    f.mode = "implicit";
    const auto r = capture([&](auto& o, auto& e) { return cmd_solve(kConfigs / "tanh_cos.json", f, o, e); });
    EXPECT_EQ(r.code, kConfigError);
}

TEST(Validate, InvariantSuitePasses) {
    ValidateFlags f;
    f.suite = "invariants";
    const auto r = capture([&](auto& o, auto& e) { return cmd_validate(f, o, e); });
    EXPECT_EQ(r.code, kOk) << r.out << r.err;
    EXPECT_NE(r.out.find("cases passed"), std::string::npos);
    f.suite = "everything";
    EXPECT_EQ(capture([&](auto& o, auto& e) { return cmd_validate(f, o, e); }).code, kConfigError);
}

TEST(Validate, TableAudit) {
    const auto file = temp_file("qbsde_cli_table.json");
    std::ofstream(file) << R"({"d": 1, "k": 1, "C2": 0.5, "C3": 0.0, "C4": 0.0,
        "rows": [{"y": [0], "z": [0], "f": [0]}, {"y": [1], "z": [0], "f": [1]}]})";
    ValidateFlags f;
    f.table = file;
    EXPECT_EQ(capture([&](auto& o, auto& e) { return cmd_validate(f, o, e); }).code, kNotCertified);
    fs::remove(file);
}

TEST(Contraction, GateAndProbe) {
    ContractionFlags f;
    f.paths = 2000;
    f.steps = 5;
    EXPECT_EQ(capture([&](auto& o, auto& e) { return cmd_contraction(kConfigs / "tanh_cos.json", f, o, e); }).code,
              kNotCertified);
    const auto r = capture([&](auto& o, auto& e) { return cmd_contraction(kConfigs / "theorem_grade.json", f, o, e); });
    EXPECT_EQ(r.code, kOk);
    EXPECT_NE(r.out.find("max ratio"), std::string::npos);
}

TEST(Paths, DefaultTracePath) {
    EXPECT_EQ(default_trace_path("configs/tanh_cos.json"), fs::path("configs/tanh_cos.trace.csv"));
}
