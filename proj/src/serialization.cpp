#include "qbsde/serialization.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "qbsde/common.hpp"

namespace qbsde {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

template <class T>
Json opt(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

[[noreturn]] void missing(const std::string& field) {
    throw ConfigError(field, "missing required field \"" + field + "\"");
}

const Json& need(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) missing(path);
    return obj.at(key);
}

double need_number(const Json& obj, const std::string& key, const std::string& path) {
    const Json& v = need(obj, key, path);
    if (!v.is_number()) throw ConfigError(path, "field \"" + path + "\" must be a number");
    return v.get<double>();
}

int need_int(const Json& obj, const std::string& key, const std::string& path) {
    const Json& v = need(obj, key, path);
    if (!v.is_number_integer()) throw ConfigError(path, "field \"" + path + "\" must be an integer");
    return v.get<int>();
}

std::vector<double> number_list(const Json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "field \"" + path + "\" must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(path, "field \"" + path + "\" must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

// Matrices are written as arrays of rows; a flat row-major array is accepted too.
std::vector<double> matrix(const Json& v, const std::string& path) {
    if (v.is_array() && !v.empty() && v.front().is_array()) {
        std::vector<double> out;
        for (const auto& row : v) {
            const auto r = number_list(row, path);
            out.insert(out.end(), r.begin(), r.end());
        }
        return out;
    }
    return number_list(v, path);
}

Json rows_of(const std::vector<double>& flat, std::size_t cols) {
    Json out = Json::array();
    for (std::size_t r = 0; cols && r * cols < flat.size(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < cols; ++c) row.push_back(flat[r * cols + c]);
        out.push_back(std::move(row));
    }
    return out;
}

Json rows_of(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

std::string kind_of(const Json& obj, const std::string& path) {
    const Json& v = need(obj, "kind", path + ".kind");
    if (!v.is_string()) throw ConfigError(path + ".kind", "field \"" + path + ".kind\" must be a string");
    return v.get<std::string>();
}

TerminalSpec terminal_from_json(const Json& t) {
    const std::string kind = kind_of(t, "terminal");
    if (kind == "constant") return ConstantTerminal{number_list(need(t, "value", "terminal.value"), "terminal.value")};
    if (kind == "cosine") return CosineTerminal{t.value("scale", 1.0)};
    if (kind == "sine") return SineTerminal{t.value("scale", 1.0)};
    if (kind == "clipped_polynomial") {
        ClippedPolynomialTerminal p;
        const Json& c = need(t, "coefficients", "terminal.coefficients");
        if (!c.is_array()) throw ConfigError("terminal.coefficients", "must be an array of arrays");
        for (const auto& row : c) p.coefficients.push_back(number_list(row, "terminal.coefficients"));
        p.clip_radius = need_number(t, "clip_radius", "terminal.clip_radius");
        return p;
    }
    throw ConfigError("terminal.kind", "unknown terminal kind \"" + kind + "\"");
}

GeneratorSpec generator_from_json(const Json& g) {
    const std::string kind = kind_of(g, "generator");
    if (kind == "zero") return ZeroGenerator{};
    if (kind == "constant") return ConstantGenerator{number_list(need(g, "c", "generator.c"), "generator.c")};
    if (kind == "tanh") return TanhGenerator{number_list(need(g, "c", "generator.c"), "generator.c")};
    if (kind == "clipped_linear") {
        ClippedLinearGenerator lin;
        lin.A = matrix(need(g, "A", "generator.A"), "generator.A");
        lin.B = matrix(need(g, "B", "generator.B"), "generator.B");
        lin.clip_radius = need_number(g, "clip_radius", "generator.clip_radius");
        return lin;
    }
    throw ConfigError("generator.kind", "unknown generator kind \"" + kind + "\"");
}

Json terminal_to_json(const TerminalSpec& t) {
    return std::visit(overloaded{
                          [](const ConstantTerminal& c) { return Json{{"kind", "constant"}, {"value", c.value}}; },
                          [](const CosineTerminal& c) { return Json{{"kind", "cosine"}, {"scale", c.scale}}; },
                          [](const SineTerminal& s) { return Json{{"kind", "sine"}, {"scale", s.scale}}; },
                          [](const ClippedPolynomialTerminal& p) {
                              return Json{{"kind", "clipped_polynomial"},
                                          {"coefficients", p.coefficients},
                                          {"clip_radius", p.clip_radius}};
                          },
                      },
                      t);
}

Json generator_to_json(const GeneratorSpec& g, int d, int k) {
    return std::visit(overloaded{
                          [](const ZeroGenerator&) { return Json{{"kind", "zero"}}; },
                          [](const ConstantGenerator& c) { return Json{{"kind", "constant"}, {"c", c.c}}; },
                          [](const TanhGenerator& t) { return Json{{"kind", "tanh"}, {"c", t.c}}; },
                          [&](const ClippedLinearGenerator& l) {
                              return Json{{"kind", "clipped_linear"},
                                          {"A", rows_of(l.A, static_cast<std::size_t>(d))},
                                          {"B", rows_of(l.B, static_cast<std::size_t>(d * k))},
                                          {"clip_radius", l.clip_radius}};
                          },
                      },
                      g);
}

std::string csv_number(double x) {
    if (std::isnan(x)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace

ProblemSpec problem_from_json(const Json& doc) {
    if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
    ProblemSpec s;
    s.d = need_int(doc, "d", "d");
    s.k = need_int(doc, "k", "k");
    s.T = need_number(doc, "T", "T");
    s.C1 = need_number(doc, "C1", "C1");
    s.C2 = need_number(doc, "C2", "C2");
    s.C3 = need_number(doc, "C3", "C3");
    s.C4 = need_number(doc, "C4", "C4");
    s.terminal = terminal_from_json(need(doc, "terminal", "terminal"));
    s.generator = generator_from_json(need(doc, "generator", "generator"));
    if (doc.contains("solver")) {
        const Json& sv = doc.at("solver");
        if (!sv.is_object()) throw ConfigError("solver", "field \"solver\" must be an object");
        if (sv.contains("degree")) s.solver.degree = need_int(sv, "degree", "solver.degree");
        if (sv.contains("terminal_feature")) {
            if (!sv.at("terminal_feature").is_boolean())
                throw ConfigError("solver.terminal_feature", "field \"solver.terminal_feature\" must be a boolean");
            s.solver.terminal_feature = sv.at("terminal_feature").get<bool>();
        }
        if (sv.contains("max_iter")) s.solver.max_iter = need_int(sv, "max_iter", "solver.max_iter");
        if (sv.contains("tol")) s.solver.tol = need_number(sv, "tol", "solver.tol");
    }
    s.validate();
    return s;
}

ProblemSpec load_problem(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("", "cannot read configuration " + file.string());
    Json doc;
    try {
        doc = Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", "malformed JSON in " + file.string() + ": " + e.what());
    }
    return problem_from_json(doc);
}

Json to_json(const ProblemSpec& s) {
    return Json{{"d", s.d},
                {"k", s.k},
                {"T", s.T},
                {"C1", s.C1},
                {"C2", s.C2},
                {"C3", s.C3},
                {"C4", s.C4},
                {"terminal", terminal_to_json(s.terminal)},
                {"generator", generator_to_json(s.generator, s.d, s.k)},
                {"solver",
                 {{"degree", s.solver.degree},
                  {"terminal_feature", s.solver.terminal_feature},
                  {"max_iter", s.solver.max_iter},
                  {"tol", s.solver.tol}}}};
}

Json to_json(const ConstantLedger& L) {
    const char* binding = "none";
    if (L.terms.max() > 0.0) {
        binding = L.terms.coupling_term >= L.terms.max()    ? "coupling"
                  : L.terms.lipschitz_term >= L.terms.max() ? "lipschitz"
                                                            : "drift";
    }
    return Json{{"C1", L.C1},
                {"C2", L.C2},
                {"C3", L.C3},
                {"C4", L.C4},
                {"T", L.T},
                {"K", num(L.K)},
                {"e_KC1sq_log", num(L.e_KC1sq_log)},
                {"beta", num(L.beta)},
                {"alpha", num(L.alpha)},
                {"C6", num(L.C6())},
                {"C6_log", num(L.C6_log)},
                {"R_log", num(L.R_log)},
                {"delta", L.delta},
                {"lambda", L.lambda},
                {"windows", L.windows},
                {"tilde_R_log", num(L.tilde_R_log)},
                {"contraction_factor", num(L.contraction_factor)},
                {"terms",
                 {{"drift_term", num(L.terms.drift_term)},
                  {"lipschitz_term", num(L.terms.lipschitz_term)},
                  {"coupling_term", num(L.terms.coupling_term)},
                  {"binding", binding}}},
                {"prop_gate", L.prop_gate},
                {"existence_gate", L.existence_gate},
                {"uniqueness_gate", L.uniqueness_gate},
                {"theorem_reference_gate", L.theorem_reference_gate},
                {"delta_forced", L.delta_forced},
                {"note", L.note}};
}

Json to_json(const ProcessApprox& a) {
    Json exps = Json::array();
    for (const auto& e : a.basis().exponents()) exps.push_back(e);
    Json slices = Json::array();
    for (int i = 0; i < a.steps(); ++i) {
        slices.push_back(Json{{"t", a.grid().time(i)},
                              {"scale", a.scale(i)},
                              {"y", rows_of(a.y_coeffs(i))},
                              {"z", rows_of(a.z_coeffs(i))}});
    }
    return Json{{"grid", {{"t0", a.grid().t0}, {"t1", a.grid().t1}, {"steps", a.steps()}}},
                {"d", a.d()},
                {"k", a.k()},
                {"basis",
                 {{"family", "hermite"},
                  {"argument", "w / sqrt(t)"},
                  {"degree", a.basis().spec().degree},
                  {"terminal_feature", a.basis().feature_dim() > 0},
                  {"size", a.basis().size()},
                  {"exponents", std::move(exps)}}},
                {"clip_bound", a.clip_bound()},
                {"terminal_slice", "terminal map"},
                {"slices", std::move(slices)}};
}

Json to_json(const ConvergenceTrace& trace) {
    Json recs = Json::array();
    for (const auto& r : trace.records) {
        recs.push_back(Json{{"iter", r.iter},
                            {"dist_y", num(r.dist_y)},
                            {"dist_z", num(r.dist_z)},
                            {"ratio", num(r.ratio)},
                            {"clip_events", r.clip_events},
                            {"z_bmo_sq", num(r.z_bmo_sq)},
                            {"z_bmo_se", num(r.z_bmo_se)},
                            {"y_bmo_bound_check", opt(r.y_bmo_bound_check)},
                            {"y0", num(r.y0)},
                            {"y0_se", num(r.y0_se)}});
    }
    return Json{{"verdict", to_string(trace.verdict)},
                {"iterations", trace.records.size()},
                {"records", std::move(recs)},
                {"warnings", trace.warnings}};
}

Json to_json(const SolveReport& r) {
    Json windows = Json::array();
    Json seeds = Json::array();
    for (const auto& w : r.windows) {
        seeds.push_back(w.seed);
        windows.push_back(Json{{"index", w.index},
                               {"t0", w.t0},
                               {"t1", w.t1},
                               {"seed", w.seed},
                               {"z_bmo_sq", num(w.z_bmo_sq)},
                               {"z_bmo_se", num(w.z_bmo_se)},
                               {"z_m2", num(w.z_m2.value)},
                               {"z_m2_se", num(w.z_m2.se)},
                               {"weight_mean", num(w.weight_mean)},
                               {"weight_se", num(w.weight_se)},
                               {"trace", to_json(w.trace)}});
    }
    Json oracle = nullptr;
    if (r.oracle) {
        oracle = Json{{"name", r.oracle->name},
                      {"reference_y0", r.oracle->reference},
                      {"deviation_y0", r.oracle->deviation},
                      {"within_3se", r.oracle->within_3se}};
    }
    return Json{{"version", r.version},
                {"mode", to_string(r.mode)},
                {"n_paths", r.n_paths},
                {"steps_per_window", r.steps_per_window},
                {"seeds", {{"master", r.master_seed}, {"windows", std::move(seeds)}}},
                {"best_effort", r.best_effort},
                {"converged", r.converged},
                {"failing_windows", r.failing_windows},
                {"y0", num(r.y0)},
                {"y0_se", num(r.y0_se)},
                {"z0", num(r.z0)},
                {"oracle_deviation_y0", r.oracle ? num(r.oracle->deviation) : Json(nullptr)},
                {"oracle", std::move(oracle)},
                {"norms",
                 {{"z_bmo_sq", num(r.z_bmo_sq)},
                  {"z_bmo_se", num(r.z_bmo_se)},
                  {"z_m2", num(r.z_m2.value)},
                  {"z_m2_se", num(r.z_m2.se)},
                  {"tilde_R_check", opt(r.tilde_R_check)}}},
                {"gates",
                 {{"prop_gate", r.ledger.prop_gate},
                  {"existence_gate", r.ledger.existence_gate},
                  {"uniqueness_gate", r.ledger.uniqueness_gate},
                  {"theorem_reference_gate", r.ledger.theorem_reference_gate}}},
                {"clip_events", r.clip_events},
                {"warnings", r.warnings},
                {"windows", std::move(windows)},
                {"ledger", to_json(r.ledger)}};
}

Json to_json(const ValidationReport& v) {
    return Json{{"samples", v.samples},
                {"max_lipschitz_ratio", num(v.max_lipschitz_ratio)},
                {"max_growth_excess", num(v.max_growth_excess)},
                {"lipschitz_ok", v.lipschitz_ok},
                {"growth_ok", v.growth_ok},
                {"passed", v.passed()},
                {"lipschitz_witness",
                 {{"y1", v.lipschitz_witness.y1},
                  {"z1", v.lipschitz_witness.z1},
                  {"y2", v.lipschitz_witness.y2},
                  {"z2", v.lipschitz_witness.z2}}},
                {"growth_witness", {{"y", v.growth_witness.y1}, {"z", v.growth_witness.z1}}}};
}

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace, bool header) {
    if (header) os << "iter,dist_y,dist_z,ratio,clip_events\n";
    for (const auto& r : trace.records) {
        os << r.iter << ',' << csv_number(r.dist_y) << ',' << csv_number(r.dist_z) << ','
           << csv_number(r.ratio) << ',' << r.clip_events << '\n';
    }
}

void write_trace_csv(std::ostream& os, const SolveReport& report) {
    bool header = true;
    for (const auto& w : report.windows) {
        write_trace_csv(os, w.trace, header);
        header = false;
    }
    if (header) os << "iter,dist_y,dist_z,ratio,clip_events\n";
}

GeneratorTable load_generator_table(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("", "cannot read generator table " + file.string());
    Json doc;
    try {
        doc = Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", "malformed JSON in " + file.string() + ": " + e.what());
    }
    GeneratorTable t;
    t.d = need_int(doc, "d", "d");
    t.k = need_int(doc, "k", "k");
    t.C2 = need_number(doc, "C2", "C2");
    t.C3 = need_number(doc, "C3", "C3");
    t.C4 = need_number(doc, "C4", "C4");
    const Json& rows = need(doc, "rows", "rows");
    if (!rows.is_array() || rows.size() < 2) throw ConfigError("rows", "field \"rows\" needs at least two entries");
    for (const auto& row : rows) {
        GeneratorSample s;
        s.y = number_list(need(row, "y", "rows.y"), "rows.y");
        s.z = number_list(need(row, "z", "rows.z"), "rows.z");
        s.f = number_list(need(row, "f", "rows.f"), "rows.f");
        if (s.y.size() != static_cast<std::size_t>(t.d) || s.z.size() != static_cast<std::size_t>(t.d * t.k) ||
            s.f.size() != static_cast<std::size_t>(t.k))
            throw ConfigError("rows", "table row has the wrong shape for (d, k)");
        t.rows.push_back(std::move(s));
    }
    return t;
}

}  // namespace qbsde
