#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbsde/certificate.hpp"
#include "qbsde/common.hpp"
#include "qbsde/pasting.hpp"
#include "qbsde/serialization.hpp"
#include "suites.hpp"

using namespace qbsde;

namespace {

Json minimal() {
    return Json::parse(R"({
        "d": 1, "k": 1, "T": 1.0, "C1": 1.0, "C2": 1.0, "C3": 0.0, "C4": 0.0,
        "terminal": {"kind": "cosine", "scale": 1.0},
        "generator": {"kind": "tanh", "c": [1.0]}
    })");
}

}  // namespace

TEST(ProblemJson, ParsesEveryFamily) {
    const auto s = problem_from_json(minimal());
    EXPECT_TRUE(std::holds_alternative<TanhGenerator>(s.generator));
    EXPECT_EQ(std::get<CosineTerminal>(s.terminal).scale, 1.0);

    auto j = minimal();
    j["d"] = 2;
    j["k"] = 2;
    j["terminal"] = Json::parse(R"({"kind": "clipped_polynomial", "coefficients": [[0, 1], [1]], "clip_radius": 2})");
    j["generator"] = Json::parse(
        R"({"kind": "clipped_linear", "A": [[1, 0], [0, 1]], "B": [[1,0,0,0],[0,0,0,1]], "clip_radius": 3})");
    j["solver"] = Json::parse(R"({"degree": 3, "max_iter": 7, "tol": 1e-6})");
    const auto v = problem_from_json(j);
    const auto& g = std::get<ClippedLinearGenerator>(v.generator);
    EXPECT_EQ(g.A, (std::vector<double>{1, 0, 0, 1}));
    EXPECT_EQ(g.B.size(), 8u);
    EXPECT_EQ(v.solver.degree, 3);
    EXPECT_EQ(v.solver.max_iter, 7);

    j["terminal"] = Json::parse(R"({"kind": "constant", "value": [0.1, 0.2]})");
    j["generator"] = Json::parse(R"({"kind": "constant", "c": [0.5, 0.5]})");
    EXPECT_NO_THROW(problem_from_json(j));
    j["generator"] = Json::parse(R"({"kind": "zero"})");
    EXPECT_NO_THROW(problem_from_json(j));
}

TEST(ProblemJson, MissingOrBadFieldNamesTheField) {
    auto j = minimal();
    j.erase("C3");
    try {
        problem_from_json(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "C3");
        EXPECT_NE(std::string(e.what()).find("C3"), std::string::npos);
    }
    j = minimal();
    j["generator"]["kind"] = "cubic";
    EXPECT_THROW(problem_from_json(j), ConfigError);
    j = minimal();
    j["T"] = "one";
    EXPECT_THROW(problem_from_json(j), ConfigError);
    EXPECT_THROW(load_problem("/nonexistent/problem.json"), ConfigError);
}

TEST(ProblemJson, RoundTrip) {
    const auto s = cli::certified_problem();
    const auto back = problem_from_json(to_json(s));
    EXPECT_EQ(back.C3, s.C3);
    EXPECT_EQ(std::get<ClippedLinearGenerator>(back.generator).B, std::get<ClippedLinearGenerator>(s.generator).B);
    EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
}

TEST(LedgerJson, NaNBecomesNull) {
    ProblemSpec s = cli::heat_kernel_problem();  // C3 = 0: degenerate ledger
    const auto j = to_json(certify(s));
    EXPECT_TRUE(j["K"].is_null());
    EXPECT_TRUE(j["C6"].is_null());
    EXPECT_FALSE(j["existence_gate"].get<bool>());
    const auto t = to_json(certify(cli::certified_problem()));
    EXPECT_EQ(t["terms"]["binding"], "coupling");
    EXPECT_TRUE(t["theorem_reference_gate"].get<bool>());
}

TEST(TraceCsv, HeaderAndEmptyFirstRatio) {
    SolveOptions o;
    o.n_paths = 2000;
    o.steps = 5;
    const auto rep = solve_full(cli::tanh_problem(), certify(cli::tanh_problem()), o).report;
    std::ostringstream os;
    write_trace_csv(os, rep);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "iter,dist_y,dist_z,ratio,clip_events");
    std::getline(is, line);
    EXPECT_EQ(line.rfind("1,", 0), 0u);
    EXPECT_NE(line.find(",,"), std::string::npos);
    std::size_t rows = 1;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, rep.windows[0].trace.records.size());

    const auto j = to_json(rep);
    EXPECT_EQ(j["oracle_deviation_y0"].get<double>(), rep.oracle->deviation);
    EXPECT_EQ(j["windows"].size(), 1u);
}

TEST(GeneratorTableJson, Loads) {
    const auto file = std::filesystem::temp_directory_path() / "qbsde_table.json";
    {
        std::ofstream f(file);
        f << R"({"d": 1, "k": 1, "C2": 1.0, "C3": 0.0, "C4": 0.0,
                 "rows": [{"y": [0], "z": [0], "f": [0]}, {"y": [1], "z": [0], "f": [0.5]}]})";
    }
    const auto t = load_generator_table(file);
    std::filesystem::remove(file);
    EXPECT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1].f[0], 0.5);
}
