#include "sgfem/runner.hpp"

#include "sgfem/errors.hpp"
#include "sgfem/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace sgfem::runner {

namespace {

using config::Experiment;
using config::FieldKind;
using config::FormChoice;
using config::RunConfig;
using nlohmann::json;
using polychaos::IndexSet;

const fem::ScalarFn kUnitForcing = [](Point) { return 1.0; };

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json index_list(const IndexSet& s) {
    json a = json::array();
    for (const auto& m : s) a.push_back(m.entries());
    return a;
}

std::string amplitude_name(const RunConfig& c) { return c.field == FieldKind::KL ? "sigma" : "alpha_bar"; }

std::string g6(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

bool wants(FormChoice have, FormChoice f) { return have == FormChoice::Both || have == f; }

struct Reference {
    int level = 0;
    IndexSet P;
    double energy_sq = 0.0;
    int iterations = 0;
    double residual = 0.0;
    double seconds = 0.0;
};

Reference solve_reference(const std::shared_ptr<const randfield::CoefficientModel>& model, int level,
                          const IndexSet& P, const galerkin::SolverOptions& opts, std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();
    auto space = std::make_shared<fem::FESpace>(fem::UniformGrid(model->field().domain(), level), fem::SpaceKind::Q2);
    if (log)
        *log << "  reference: Q2 level " << level << ", #P = " << P.size() << ", unknowns "
             << space->num_free() * P.size() << std::endl;
    const auto sys = galerkin::assemble(model, space, P, kUnitForcing);
    const auto sol = galerkin::solve(sys, opts);
    if (!sol.converged)
        throw NumericalError("reference solve did not converge (relative residual " + std::to_string(sol.residual) +
                             ")");
    Reference r;
    r.level = level;
    r.P = P;
    r.energy_sq = galerkin::energy_norm_sq(sys, sol);
    r.iterations = sol.iterations;
    r.residual = sol.residual;
    r.seconds = seconds_since(t0);
    return r;
}

json reference_json(const Reference& r) {
    return json{{"space", "Q2"},
                {"level", r.level},
                {"P", index_list(r.P)},
                {"energy_sq", r.energy_sq},
                {"solver_iterations", r.iterations},
                {"solver_residual", r.residual},
                {"seconds", r.seconds}};
}

json coefficient_diagnostics(const RunConfig& c, const randfield::CoefficientModel& model) {
    const auto grid = randfield::sample_coefficient_range(model);
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const Rect d = model.field().domain();
    std::vector<double> y(model.num_params());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int s = 0; s < c.diagnostic_samples; ++s) {
        for (double& v : y) v = U(rng);
        for (int j = 0; j <= 8; ++j)
            for (int i = 0; i <= 8; ++i) {
                const double t = model.T({d.x0 + d.side * i / 8.0, d.y0 + d.side * j / 8.0}, y);
                lo = std::min(lo, t);
                hi = std::max(hi, t);
            }
    }
    json out{{"grid_min", grid.min}, {"grid_max", grid.max}, {"samples", c.diagnostic_samples}};
    if (c.diagnostic_samples > 0) {
        out["sampled_min"] = lo;
        out["sampled_max"] = hi;
    }
    return out;
}

std::vector<IndexSet> detail_sets(const RunConfig& c, const IndexSet& P, const randfield::CoefficientModel& model) {
    std::vector<IndexSet> out;
    if (c.detail_degrees.empty()) {
        out.push_back(estimator::detail_index_set(P, model));
        return out;
    }
    for (int d : c.detail_degrees) out.push_back(polychaos::complete_set(P.num_params(), d).set_difference(P));
    return out;
}

// One estimator evaluation in a sweep.
struct SweepRow {
    double amplitude = 0.0;
    int level = 0;
    double h = 0.0;
    int detail_degree = -1;   // -1: default detail rule
    std::size_t n_P = 0;
    std::size_t n_Q = 0;
    double energy_sq = 0.0;
    std::optional<estimator::EstimateReport> r0, r1;
    std::optional<double> theta0, theta1;
};

json row_json(const SweepRow& r, int solver_iterations, double solver_residual) {
    json j{{"level", r.level},
           {"h", r.h},
           {"n_P", r.n_P},
           {"n_Q", r.n_Q},
           {"energy_sq", r.energy_sq},
           {"solver_iterations", solver_iterations},
           {"solver_residual", solver_residual}};
    if (r.detail_degree >= 0) j["detail_degree"] = r.detail_degree;
    const auto put = [&](const char* tag, const std::optional<estimator::EstimateReport>& rep,
                         const std::optional<double>& theta) {
        if (!rep) return;
        json e{{"eta", rep->eta}, {"spatial_sq", rep->spatial_sq}, {"parametric_sq", rep->parametric_sq}};
        if (theta) e["theta"] = *theta;
        j[tag] = e;
    };
    put("b0", r.r0, r.theta0);
    put("b1", r.r1, r.theta1);
    return j;
}

std::string sweep_table(const RunConfig& c, const std::vector<SweepRow>& rows, bool reference) {
    const std::string value = reference ? "theta" : "eta";
    const auto cell = [&](const SweepRow& r, bool b1) -> std::string {
        const auto& rep = b1 ? r.r1 : r.r0;
        if (!rep) return "";
        if (reference) return g6(*(b1 ? r.theta1 : r.theta0));
        return g6(rep->eta);
    };
    const bool f0 = wants(c.form, FormChoice::B0), f1 = wants(c.form, FormChoice::B1);
    std::ostringstream os;

    if (c.experiment == Experiment::SingleSolve) {
        os << amplitude_name(c) << ",level,h,n_P,n_Q,energy_sq";
        if (f0) os << ",spatial0,parametric0," << value << "0";
        if (f1) os << ",spatial1,parametric1," << value << "1";
        os << '\n';
        for (const auto& r : rows) {
            os << g6(r.amplitude) << ',' << r.level << ',' << g6(r.h) << ',' << r.n_P << ',' << r.n_Q << ','
               << g6(r.energy_sq);
            if (f0) os << ',' << g6(std::sqrt(r.r0->spatial_sq)) << ',' << g6(std::sqrt(r.r0->parametric_sq)) << ','
                       << cell(r, false);
            if (f1) os << ',' << g6(std::sqrt(r.r1->spatial_sq)) << ',' << g6(std::sqrt(r.r1->parametric_sq)) << ','
                       << cell(r, true);
            os << '\n';
        }
        return os.str();
    }

    if (c.detail_degrees.size() > 1) {
        // One row per (amplitude, level); columns per detail degree.
        os << amplitude_name(c) << ",h";
        for (int d : c.detail_degrees) {
            if (f0) os << ',' << value << "0_d" << d;
            if (f1) os << ',' << value << "1_d" << d;
        }
        os << '\n';
        for (std::size_t i = 0; i < rows.size(); i += c.detail_degrees.size()) {
            os << g6(rows[i].amplitude) << ',' << g6(rows[i].h);
            for (std::size_t k = 0; k < c.detail_degrees.size(); ++k) {
                if (f0) os << ',' << cell(rows[i + k], false);
                if (f1) os << ',' << cell(rows[i + k], true);
            }
            os << '\n';
        }
        return os.str();
    }

    // One row per level; columns per amplitude.
    os << "h";
    for (double a : c.amplitudes) {
        if (f0) os << ',' << value << "0_" << amplitude_name(c) << g6(a);
        if (f1) os << ',' << value << "1_" << amplitude_name(c) << g6(a);
    }
    os << '\n';
    const std::size_t nl = c.levels.size();
    for (std::size_t li = 0; li < nl; ++li) {
        os << g6(rows[li].h);
        for (std::size_t ai = 0; ai < c.amplitudes.size(); ++ai) {
            const auto& r = rows[ai * nl + li];
            if (f0) os << ',' << cell(r, false);
            if (f1) os << ',' << cell(r, true);
        }
        os << '\n';
    }
    return os.str();
}

Artifacts run_sweep(const RunConfig& c, json& record, std::ostream* log) {
    const galerkin::SolverOptions opts{c.rel_tol, c.max_iter};
    const IndexSet P = initial_index_set(c);
    std::vector<SweepRow> rows;
    json results = json::array();
    for (double amp : c.amplitudes) {
        if (log) *log << amplitude_name(c) << " = " << amp << std::endl;
        const auto model = make_model(c, amp);
        json entry{{"amplitude", amp}, {"coefficient", coefficient_diagnostics(c, *model)}};

        std::optional<Reference> ref;
        if (c.reference) {
            const int level = c.reference_level >= 0 ? c.reference_level
                                                     : *std::max_element(c.levels.begin(), c.levels.end()) + 1;
            const int degree = c.reference_degree >= 0 ? c.reference_degree : P.max_total_degree() + 2;
            const IndexSet Pref = polychaos::complete_set(P.num_params(), degree).set_union(P);
            ref = solve_reference(model, level, Pref, opts, log);
            entry["reference"] = reference_json(*ref);
        }

        json jrows = json::array();
        for (int level : c.levels) {
            const auto t0 = std::chrono::steady_clock::now();
            auto space = std::make_shared<fem::FESpace>(fem::UniformGrid(model->field().domain(), level),
                                                        fem::SpaceKind::Q1);
            const auto sys = galerkin::assemble(model, space, P, kUnitForcing);
            const auto sol = galerkin::solve(sys, opts);
            if (!sol.converged)
                throw NumericalError("Galerkin solve at level " + std::to_string(level) +
                                     " did not converge (relative residual " + std::to_string(sol.residual) + ")");
            const double energy = galerkin::energy_norm_sq(sys, sol);
            const auto Qs = detail_sets(c, P, *model);
            for (std::size_t qi = 0; qi < Qs.size(); ++qi) {
                const IndexSet& Q = Qs[qi];
                SweepRow row;
                row.amplitude = amp;
                row.level = level;
                row.h = space->grid().h();
                row.detail_degree = c.detail_degrees.empty() ? -1 : c.detail_degrees[qi];
                row.n_P = P.size();
                row.n_Q = Q.size();
                row.energy_sq = energy;
                if (wants(c.form, FormChoice::B0))
                    row.r0 = estimator::estimate(sys, sol, Q, estimator::AuxiliaryForm::b0(), kUnitForcing);
                if (wants(c.form, FormChoice::B1)) {
                    const auto form = estimator::AuxiliaryForm::b1(*model, estimator::b1_gammas(*model, P, Q),
                                                                   c.b1_quad_level);
                    row.r1 = estimator::estimate(sys, sol, Q, form, kUnitForcing);
                }
                if (ref) {
                    if (row.r0) row.theta0 = estimator::effectivity(row.r0->eta, ref->energy_sq, energy);
                    if (row.r1) row.theta1 = estimator::effectivity(row.r1->eta, ref->energy_sq, energy);
                }
                json jr = row_json(row, sol.iterations, sol.residual);
                jr["seconds"] = seconds_since(t0);
                jrows.push_back(jr);
                if (log) {
                    *log << "  level " << level << " h = " << row.h << " #Q = " << Q.size();
                    if (row.r0) *log << " eta0 = " << row.r0->eta;
                    if (row.theta0) *log << " theta0 = " << *row.theta0;
                    if (row.r1) *log << " eta1 = " << row.r1->eta;
                    if (row.theta1) *log << " theta1 = " << *row.theta1;
                    *log << std::endl;
                }
                rows.push_back(std::move(row));
            }
        }
        entry["rows"] = jrows;
        results.push_back(entry);
    }
    record["results"] = results;
    Artifacts a;
    a.table_csv = sweep_table(c, rows, c.reference);
    return a;
}

Artifacts run_adaptive(const RunConfig& c, json& record, std::ostream* log) {
    const galerkin::SolverOptions opts{c.rel_tol, c.max_iter};
    json results = json::array();
    std::ostringstream table, trace;
    table << amplitude_name(c) << ",K,eta_K,h_K,level_K,n_P_K,n_Q_K,n_coupling,N_K,converged,parametric_refinements,P_K";
    if (c.reference) table << ",theta_min,theta_max";
    table << '\n';
    bool trace_header = false;
    for (double amp : c.amplitudes) {
        if (log) *log << amplitude_name(c) << " = " << amp << std::endl;
        const auto t0 = std::chrono::steady_clock::now();
        const auto model = make_model(c, amp);
        adaptive::AdaptConfig ac;
        ac.model = model;
        ac.initial_level = c.initial_level;
        ac.P0 = initial_index_set(c);
        ac.theta = c.theta;
        ac.epsilon = c.epsilon;
        ac.max_iterations = c.max_iterations;
        ac.solver = opts;
        ac.f = kUnitForcing;
        auto tr = adaptive::adapt_loop(ac);
        const double loop_seconds = seconds_since(t0);
        const auto& fin = tr.final();
        if (log)
            for (const auto& r : tr.iterations)
                *log << "  k = " << r.k << " h = " << r.h << " #P = " << r.P.size() << " eta = " << r.eta << " -> "
                     << adaptive::to_string(r.decision) << std::endl;

        json entry{{"amplitude", amp}, {"coefficient", coefficient_diagnostics(c, *model)}};
        if (c.reference) {
            const int level = c.reference_level >= 0 ? c.reference_level : fin.level + 1;
            const std::size_t M = fin.P.num_params();
            const IndexSet Pref =
                c.reference_degree >= 0
                    ? polychaos::complete_set(M, c.reference_degree).set_union(fin.P)
                    : polychaos::neighborhood(fin.P, polychaos::complete_set(M, 1));
            const auto ref = solve_reference(model, level, Pref, opts, log);
            entry["reference"] = reference_json(ref);
            adaptive::attach_effectivity(tr, ref.energy_sq);
        }
        const std::size_t n_coupling = galerkin::coupling_set(*model, fin.Q, fin.P).size();
        int param_refinements = 0;
        double th_lo = std::numeric_limits<double>::infinity(), th_hi = 0.0;
        for (const auto& r : tr.iterations) {
            if (r.decision == adaptive::Decision::Parametric) ++param_refinements;
            th_lo = std::min(th_lo, r.theta_eff);
            th_hi = std::max(th_hi, r.theta_eff);
        }
        entry["trace"] = json::parse(tr.to_json());
        entry["K"] = fin.k;
        entry["n_coupling"] = n_coupling;
        entry["parametric_refinements"] = param_refinements;
        entry["seconds"] = loop_seconds;
        results.push_back(entry);

        table << g6(amp) << ',' << fin.k << ',' << g6(fin.eta) << ',' << g6(fin.h) << ',' << fin.level << ','
              << fin.P.size() << ',' << fin.Q.size() << ',' << n_coupling << ',' << fin.dofs_total << ','
              << (tr.converged ? "true" : "false") << ',' << param_refinements << ",\""
              << config::format_index_list(fin.P) << '"';
        if (c.reference) table << ',' << g6(th_lo) << ',' << g6(th_hi);
        table << '\n';

        std::ostringstream one;
        tr.write_csv(one);
        std::istringstream lines(one.str());
        std::string line;
        bool first = true;
        while (std::getline(lines, line)) {
            if (first) {
                first = false;
                if (!trace_header) trace << amplitude_name(c) << ',' << line << '\n';
                trace_header = true;
                continue;
            }
            trace << g6(amp) << ',' << line << '\n';
        }
    }
    record["results"] = results;
    Artifacts a;
    a.table_csv = table.str();
    a.trace_csv = trace.str();
    return a;
}

} // namespace

std::shared_ptr<const randfield::CoefficientModel> make_model(const RunConfig& c, double amplitude) {
    auto basis = std::make_shared<const polychaos::UnivariateBasis>(polychaos::build_basis(c.sigma0, kBasisSize));
    const auto M = static_cast<std::size_t>(c.M);
    auto field = std::make_shared<const randfield::AffineField>(
        c.field == FieldKind::KL ? randfield::kl_field(amplitude, c.ell1, c.ell2, M, Rect::symmetric())
                                 : randfield::cosine_field(amplitude, c.sigma_tilde, M));
    return std::make_shared<const randfield::CoefficientModel>(c.model, field, basis, c.quad_extra);
}

IndexSet initial_index_set(const RunConfig& c) {
    if (c.indices) return *c.indices;
    return polychaos::complete_set(static_cast<std::size_t>(c.M), c.degree);
}

Artifacts run(const RunConfig& c, std::ostream* log) {
    const auto problems = config::validate(c);
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    if (c.threads > 0) set_num_threads(c.threads);
    const auto t0 = std::chrono::steady_clock::now();
    json record;
    record["tool"] = "sgfem";
    record["version"] = kVersion;
    json cfg = json::object();
    for (const auto& [k, v] : config::to_key_values(c)) cfg[k] = v;
    record["config"] = cfg;
    record["threads"] = num_threads();

    Artifacts a = c.experiment == Experiment::Adaptive ? run_adaptive(c, record, log) : run_sweep(c, record, log);
    record["seconds"] = seconds_since(t0);
    a.run_json = record.dump(2);
    return a;
}

void write_artifacts(const Artifacts& a, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw std::runtime_error(std::string("cannot write ") + (fs::path(dir) / name).string());
        out << text;
    };
    put("run.json", a.run_json);
    put("table.csv", a.table_csv);
    if (!a.trace_csv.empty()) put("trace.csv", a.trace_csv);
}

std::vector<std::string> list_presets(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (e.is_regular_file() && e.path().extension() == ".cfg") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::string preset_path(const std::string& dir, const std::string& name) {
    const auto p = std::filesystem::path(dir) / (name + ".cfg");
    if (!std::filesystem::is_regular_file(p)) throw ConfigError("unknown preset '" + name + "' (looked in " + dir + ")");
    return p.string();
}

std::string preset_description(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        if (line[b] != '#') return "";
        const auto t = line.find_first_not_of(" \t#", b);
        return t == std::string::npos ? "" : line.substr(t);
    }
    return "";
}

} // namespace sgfem::runner
