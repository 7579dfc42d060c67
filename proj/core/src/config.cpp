#include "sgfem/config.hpp"

#include "sgfem/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace sgfem::config {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "name",
        "experiment",
        "model",
        "field.kind",
        "field.sigma",
        "field.alpha_bar",
        "field.ell1",
        "field.ell2",
        "field.sigma_tilde",
        "field.M",
        "field.sigma0",
        "field.quad_extra",
        "disc.levels",
        "disc.degree",
        "disc.indices",
        "estimator.form",
        "estimator.detail_degrees",
        "estimator.b1_quad_level",
        "reference.enabled",
        "reference.level",
        "reference.degree",
        "solver.rel_tol",
        "solver.max_iter",
        "adaptive.theta",
        "adaptive.epsilon",
        "adaptive.max_iterations",
        "adaptive.initial_level",
        "diagnostics.samples",
        "run.seed",
        "run.threads",
    };
    return keys;
}

// Collects parse failures instead of stopping at the first one.
class Reader {
public:
    Reader(const KeyValues& kv, std::vector<std::string>& problems) : kv_(kv), problems_(problems) {}

    const std::string* raw(const std::string& key) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? nullptr : &it->second;
    }

    void get(const std::string& key, double& out) {
        if (const auto* s = raw(key)) {
            if (auto v = to_double(*s)) out = *v;
            else fail(key, "expected a number, got '" + *s + "'");
        }
    }
    void get(const std::string& key, int& out) {
        if (const auto* s = raw(key)) {
            if (auto v = to_int(*s)) out = *v;
            else fail(key, "expected an integer, got '" + *s + "'");
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const auto* s = raw(key)) {
            std::uint64_t v = 0;
            auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
            if (ec == std::errc() && p == s->data() + s->size()) out = v;
            else fail(key, "expected a non-negative integer, got '" + *s + "'");
        }
    }
    void get(const std::string& key, bool& out) {
        if (const auto* s = raw(key)) {
            if (*s == "true" || *s == "1" || *s == "yes") out = true;
            else if (*s == "false" || *s == "0" || *s == "no") out = false;
            else fail(key, "expected true or false, got '" + *s + "'");
        }
    }
    void get(const std::string& key, std::string& out) {
        if (const auto* s = raw(key)) out = *s;
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (const auto* s = raw(key)) {
            std::vector<double> v;
            for (const auto& item : split(*s, ',')) {
                if (auto d = to_double(item)) v.push_back(*d);
                else return fail(key, "expected a comma-separated list of numbers, got '" + *s + "'");
            }
            out = std::move(v);
        }
    }
    void get(const std::string& key, std::vector<int>& out) {
        if (const auto* s = raw(key)) {
            std::vector<int> v;
            if (!trim(*s).empty()) {
                for (const auto& item : split(*s, ',')) {
                    if (auto d = to_int(item)) v.push_back(*d);
                    else return fail(key, "expected a comma-separated list of integers, got '" + *s + "'");
                }
            }
            out = std::move(v);
        }
    }

    void fail(const std::string& key, const std::string& what) { problems_.push_back(key + ": " + what); }

private:
    static std::optional<double> to_double(const std::string& s) {
        if (s.empty()) return std::nullopt;
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
        return v;
    }
    static std::optional<int> to_int(const std::string& s) {
        if (s.empty()) return std::nullopt;
        int v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
        return v;
    }

    const KeyValues& kv_;
    std::vector<std::string>& problems_;
};

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_same_v<T, double>) out += format_double(v[i]);
        else out += std::to_string(v[i]);
    }
    return out;
}

} // namespace

KeyValues parse_text(std::istream& in, const std::string& origin) {
    KeyValues kv;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        kv[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
}

KeyValues parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_text(in, path);
}

void apply_override(KeyValues& kv, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string key = trim(std::string_view(assignment).substr(0, eq));
    if (key.empty()) throw ConfigError("--set: empty key in '" + assignment + "'");
    kv[key] = trim(std::string_view(assignment).substr(eq + 1));
}

std::string to_string(Experiment e) {
    switch (e) {
    case Experiment::EffectivitySweep: return "effectivity-sweep";
    case Experiment::Adaptive: return "adaptive";
    default: return "single-solve";
    }
}

std::string to_string(FieldKind f) { return f == FieldKind::KL ? "kl" : "cosine"; }

std::string to_string(FormChoice f) {
    switch (f) {
    case FormChoice::B0: return "b0";
    case FormChoice::B1: return "b1";
    default: return "both";
    }
}

polychaos::IndexSet parse_index_list(const std::string& text) {
    std::vector<polychaos::MultiIndex> members;
    std::size_t M = 0;
    for (const auto& item : split(text, ';')) {
        if (item.empty()) continue;
        std::vector<int> e;
        std::istringstream is(item);
        std::string tok;
        while (is >> tok) {
            for (const auto& part : split(tok, ',')) {
                if (part.empty()) continue;
                int v = 0;
                auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
                if (ec != std::errc() || p != part.data() + part.size() || v < 0)
                    throw ConfigError("index list: bad entry '" + part + "'");
                e.push_back(v);
            }
        }
        if (M == 0) M = e.size();
        if (e.empty() || e.size() != M) throw ConfigError("index list: multi-indices must share one non-zero length");
        members.emplace_back(std::move(e));
    }
    if (members.empty()) throw ConfigError("index list: empty");
    return polychaos::IndexSet(M, std::move(members));
}

std::string format_index_list(const polychaos::IndexSet& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "; ";
        for (std::size_t m = 0; m < s[i].size(); ++m) {
            if (m) out += ',';
            out += std::to_string(s[i][m]);
        }
    }
    return out;
}

RunConfig from_key_values(const KeyValues& kv, std::vector<std::string>* problems_out) {
    std::vector<std::string> problems;
    for (const auto& [k, v] : kv)
        if (!known_keys().count(k)) problems.push_back(k + ": unknown key");

    RunConfig c;
    Reader r(kv, problems);
    r.get("name", c.name);

    if (const auto* s = r.raw("experiment")) {
        if (*s == "effectivity-sweep") c.experiment = Experiment::EffectivitySweep;
        else if (*s == "adaptive") c.experiment = Experiment::Adaptive;
        else if (*s == "single-solve") c.experiment = Experiment::SingleSolve;
        else r.fail("experiment", "expected effectivity-sweep, adaptive or single-solve, got '" + *s + "'");
    }
    if (const auto* s = r.raw("model")) {
        if (*s == "exp") c.model = randfield::Nonlinearity::Exp;
        else if (*s == "square") c.model = randfield::Nonlinearity::Square;
        else r.fail("model", "expected exp or square, got '" + *s + "'");
    }
    if (const auto* s = r.raw("field.kind")) {
        if (*s == "kl") c.field = FieldKind::KL;
        else if (*s == "cosine") c.field = FieldKind::Cosine;
        else r.fail("field.kind", "expected kl or cosine, got '" + *s + "'");
    }
    const std::string amp_key = c.field == FieldKind::KL ? "field.sigma" : "field.alpha_bar";
    const std::string other_key = c.field == FieldKind::KL ? "field.alpha_bar" : "field.sigma";
    r.get(amp_key, c.amplitudes);
    if (r.raw(other_key)) r.fail(other_key, "not a parameter of the " + to_string(c.field) + " field");
    r.get("field.ell1", c.ell1);
    r.get("field.ell2", c.ell2);
    r.get("field.sigma_tilde", c.sigma_tilde);
    r.get("field.M", c.M);
    r.get("field.sigma0", c.sigma0);
    r.get("field.quad_extra", c.quad_extra);

    r.get("disc.levels", c.levels);
    r.get("disc.degree", c.degree);
    if (const auto* s = r.raw("disc.indices"); s && !s->empty()) {
        try {
            c.indices = parse_index_list(*s);
        } catch (const ConfigError& e) {
            r.fail("disc.indices", e.what());
        }
    }

    if (const auto* s = r.raw("estimator.form")) {
        if (*s == "b0") c.form = FormChoice::B0;
        else if (*s == "b1") c.form = FormChoice::B1;
        else if (*s == "both") c.form = FormChoice::Both;
        else r.fail("estimator.form", "expected b0, b1 or both, got '" + *s + "'");
    }
    r.get("estimator.detail_degrees", c.detail_degrees);
    r.get("estimator.b1_quad_level", c.b1_quad_level);

    r.get("reference.enabled", c.reference);
    r.get("reference.level", c.reference_level);
    r.get("reference.degree", c.reference_degree);

    r.get("solver.rel_tol", c.rel_tol);
    r.get("solver.max_iter", c.max_iter);

    r.get("adaptive.theta", c.theta);
    r.get("adaptive.epsilon", c.epsilon);
    r.get("adaptive.max_iterations", c.max_iterations);
    r.get("adaptive.initial_level", c.initial_level);

    r.get("diagnostics.samples", c.diagnostic_samples);
    r.get("run.seed", c.seed);
    r.get("run.threads", c.threads);

    if (problems_out) {
        problems_out->insert(problems_out->end(), problems.begin(), problems.end());
    } else if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return c;
}

KeyValues to_key_values(const RunConfig& c) {
    KeyValues kv;
    kv["name"] = c.name;
    kv["experiment"] = to_string(c.experiment);
    kv["model"] = randfield::to_string(c.model);
    kv["field.kind"] = to_string(c.field);
    kv[c.field == FieldKind::KL ? "field.sigma" : "field.alpha_bar"] = join(c.amplitudes);
    kv["field.ell1"] = format_double(c.ell1);
    kv["field.ell2"] = format_double(c.ell2);
    kv["field.sigma_tilde"] = format_double(c.sigma_tilde);
    kv["field.M"] = std::to_string(c.M);
    kv["field.sigma0"] = format_double(c.sigma0);
    kv["field.quad_extra"] = std::to_string(c.quad_extra);
    kv["disc.levels"] = join(c.levels);
    kv["disc.degree"] = std::to_string(c.degree);
    kv["disc.indices"] = c.indices ? format_index_list(*c.indices) : "";
    kv["estimator.form"] = to_string(c.form);
    kv["estimator.detail_degrees"] = join(c.detail_degrees);
    kv["estimator.b1_quad_level"] = std::to_string(c.b1_quad_level);
    kv["reference.enabled"] = c.reference ? "true" : "false";
    kv["reference.level"] = std::to_string(c.reference_level);
    kv["reference.degree"] = std::to_string(c.reference_degree);
    kv["solver.rel_tol"] = format_double(c.rel_tol);
    kv["solver.max_iter"] = std::to_string(c.max_iter);
    kv["adaptive.theta"] = format_double(c.theta);
    kv["adaptive.epsilon"] = format_double(c.epsilon);
    kv["adaptive.max_iterations"] = std::to_string(c.max_iterations);
    kv["adaptive.initial_level"] = std::to_string(c.initial_level);
    kv["diagnostics.samples"] = std::to_string(c.diagnostic_samples);
    kv["run.seed"] = std::to_string(c.seed);
    kv["run.threads"] = std::to_string(c.threads);
    return kv;
}

std::vector<std::string> validate(const RunConfig& c) {
    constexpr int kMaxLevel = 12;
    std::vector<std::string> v;
    const bool kl = c.field == FieldKind::KL;
    const std::string amp = kl ? "field.sigma" : "field.alpha_bar";

    if (c.M < 1) v.emplace_back("field.M: must be at least 1");
    if (c.amplitudes.empty()) v.push_back(amp + ": at least one value required");
    for (double a : c.amplitudes)
        if (!(a > 0.0)) v.push_back(amp + ": must be positive (got " + format_double(a) + ")");
    if (kl) {
        if (!(c.ell1 > 0.0)) v.emplace_back("field.ell1: correlation length must be positive");
        if (!(c.ell2 > 0.0)) v.emplace_back("field.ell2: correlation length must be positive");
    } else if (!(c.sigma_tilde > 1.0)) {
        v.emplace_back("field.sigma_tilde: decay rate must exceed 1");
    }
    if (!(c.sigma0 > 0.0)) v.emplace_back("field.sigma0: must be positive");
    if (c.quad_extra < 1) v.emplace_back("field.quad_extra: must be at least 1");

    int p_degree = c.degree;
    if (c.indices) {
        if (c.M >= 1 && c.indices->num_params() != static_cast<std::size_t>(c.M))
            v.emplace_back("disc.indices: multi-index length differs from field.M");
        else if (!c.indices->contains_zero()) v.emplace_back("disc.indices: must contain the zero index");
        p_degree = c.indices->max_total_degree();
    } else if (c.degree < 0) {
        v.emplace_back("disc.degree: must be non-negative");
    }

    if (c.experiment != Experiment::Adaptive) {
        if (c.levels.empty()) v.emplace_back("disc.levels: at least one level required");
        for (int l : c.levels)
            if (l < 0 || l > kMaxLevel)
                v.push_back("disc.levels: level " + std::to_string(l) + " outside [0, " + std::to_string(kMaxLevel) +
                            "]");
    }
    for (int d : c.detail_degrees)
        if (d <= p_degree)
            v.push_back("estimator.detail_degrees: " + std::to_string(d) + " does not exceed the degree of P (" +
                        std::to_string(p_degree) + ")");
    if (c.b1_quad_level < 0 || c.b1_quad_level > 10) v.emplace_back("estimator.b1_quad_level: outside [0, 10]");

    if (c.reference) {
        if (c.reference_level != -1 && (c.reference_level < 0 || c.reference_level > kMaxLevel))
            v.emplace_back("reference.level: outside [0, 12] (or -1 for automatic)");
        if (c.reference_level >= 0 && c.experiment != Experiment::Adaptive && !c.levels.empty() &&
            c.reference_level < *std::max_element(c.levels.begin(), c.levels.end()))
            v.emplace_back("reference.level: coarser than the finest run grid");
        if (c.reference_degree != -1 && c.reference_degree <= p_degree)
            v.emplace_back("reference.degree: must exceed the degree of P (or -1 for automatic)");
    }

    if (!(c.rel_tol > 0.0 && c.rel_tol < 1.0)) v.emplace_back("solver.rel_tol: must lie in (0, 1)");
    if (c.max_iter < 1) v.emplace_back("solver.max_iter: must be at least 1");

    if (c.experiment == Experiment::Adaptive) {
        if (!(c.theta > 0.0 && c.theta <= 1.0)) v.emplace_back("adaptive.theta: marking threshold must lie in (0, 1]");
        if (!(c.epsilon > 0.0)) v.emplace_back("adaptive.epsilon: tolerance must be positive");
        if (c.max_iterations < 0) v.emplace_back("adaptive.max_iterations: must be non-negative");
        if (c.initial_level < 0 || c.initial_level > kMaxLevel) v.emplace_back("adaptive.initial_level: outside [0, 12]");
        if (c.M >= 1) {
            const auto P1 = polychaos::complete_set(static_cast<std::size_t>(c.M), 1);
            if (c.indices) {
                if (c.indices->num_params() == static_cast<std::size_t>(c.M) && !P1.set_difference(*c.indices).empty())
                    v.emplace_back("disc.indices: initial index set must contain P_{M,1}");
            } else if (c.degree < 1) {
                v.emplace_back("disc.degree: initial index set must contain P_{M,1} (degree >= 1)");
            }
        }
    }
    if (c.diagnostic_samples < 0) v.emplace_back("diagnostics.samples: must be non-negative");
    if (c.threads < 0) v.emplace_back("run.threads: must be non-negative");
    return v;
}

} // namespace sgfem::config
