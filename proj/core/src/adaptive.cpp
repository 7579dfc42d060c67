#include "sgfem/adaptive.hpp"

#include "sgfem/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace sgfem::adaptive {

IndexSet doerfler_mark(const IndexSet& Q, const std::vector<double>& contributions, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("doerfler_mark: theta must lie in (0, 1]");
    if (contributions.size() != Q.size()) throw std::invalid_argument("doerfler_mark: size mismatch");
    std::vector<std::size_t> order(Q.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Q is graded lexicographic, so the position breaks ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return contributions[a] > contributions[b]; });
    double total = 0.0;
    for (std::size_t i : order) {
        if (contributions[i] < 0.0) throw std::invalid_argument("doerfler_mark: negative contribution");
        total += contributions[i];
    }
    std::vector<polychaos::MultiIndex> marked;
    double sum = 0.0;
    for (std::size_t i : order) {
        if (sum >= theta * total) break;
        marked.push_back(Q[i]);
        sum += contributions[i];
    }
    return IndexSet(Q.num_params(), std::move(marked));
}

std::vector<std::string> validate(const AdaptConfig& c) {
    std::vector<std::string> v;
    if (!c.model) {
        v.emplace_back("model: missing");
        return v;
    }
    const std::size_t M = c.model->num_params();
    if (!(c.theta > 0.0 && c.theta <= 1.0)) v.emplace_back("theta: must lie in (0, 1]");
    if (!(c.epsilon > 0.0)) v.emplace_back("epsilon: must be positive");
    if (c.initial_level < 0) v.emplace_back("initial_level: must be non-negative");
    if (c.max_iterations < 0) v.emplace_back("max_iterations: must be non-negative");
    if (c.P0.num_params() != M) v.emplace_back("P0: parameter count differs from M");
    else if (!polychaos::complete_set(M, 1).set_difference(c.P0).empty())
        v.emplace_back("P0: must contain the complete degree-1 set");
    return v;
}

std::string to_string(Decision d) {
    switch (d) {
    case Decision::Spatial: return "spatial";
    case Decision::Parametric: return "parametric";
    default: return "stop";
    }
}

AdaptTrace adapt_loop(const AdaptConfig& config) {
    const auto problems = validate(config);
    if (!problems.empty()) throw ConfigError("adapt_loop: " + problems.front());
    const auto& model = config.model;
    const Rect domain = model->field().domain();

    AdaptTrace trace;
    int level = config.initial_level;
    IndexSet P = config.P0;
    for (int k = 0; k <= config.max_iterations; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        auto space = std::make_shared<fem::FESpace>(fem::UniformGrid(domain, level), fem::SpaceKind::Q1);
        const auto sys = galerkin::assemble(model, space, P, config.f);
        const auto sol = galerkin::solve(sys, config.solver);
        if (!sol.converged)
            throw NumericalError("adapt_loop: solver did not converge at k = " + std::to_string(k) +
                                 " (residual " + std::to_string(sol.residual) + ")");
        const IndexSet Q = estimator::detail_index_set(P, *model);
        const auto rep = estimator::estimate(sys, sol, Q, estimator::AuxiliaryForm::b0(), config.f);

        IterationRecord rec;
        rec.k = k;
        rec.level = level;
        rec.h = space->grid().h();
        rec.P = P;
        rec.Q = Q;
        rec.eta = rep.eta;
        rec.spatial_sq = rep.spatial_sq;
        rec.parametric_sq = rep.parametric_sq;
        rec.index_sq = rep.index_sq;
        rec.dofs_total = space->num_dofs() * P.size();
        rec.dofs_free = space->num_free() * P.size();
        rec.energy_sq = galerkin::energy_norm_sq(sys, sol);
        rec.solver_iterations = sol.iterations;
        rec.solver_residual = sol.residual;

        if (rep.eta < config.epsilon) {
            rec.decision = Decision::Stop;
        } else {
            rec.marked = doerfler_mark(Q, rep.index_sq, config.theta);
            for (const auto& mu : rec.marked) rec.marked_sq += rep.index_sq[*Q.position(mu)];
            rec.decision = rec.spatial_sq >= rec.marked_sq ? Decision::Spatial : Decision::Parametric;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        trace.iterations.push_back(rec);

        if (rec.decision == Decision::Stop) {
            trace.converged = true;
            break;
        }
        if (rec.decision == Decision::Spatial) ++level;
        else P = P.set_union(rec.marked);
    }
    return trace;
}

void attach_effectivity(AdaptTrace& trace, double reference_energy_sq) {
    for (auto& r : trace.iterations) r.theta_eff = estimator::effectivity(r.eta, reference_energy_sq, r.energy_sq);
}

namespace {

nlohmann::json index_list(const IndexSet& s) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& m : s) a.push_back(m.entries());
    return a;
}

} // namespace

std::string AdaptTrace::to_json() const {
    nlohmann::json j;
    j["converged"] = converged;
    nlohmann::json its = nlohmann::json::array();
    for (const auto& r : iterations) {
        nlohmann::json e;
        e["k"] = r.k;
        e["level"] = r.level;
        e["h"] = r.h;
        e["P"] = index_list(r.P);
        e["Q"] = index_list(r.Q);
        e["eta"] = r.eta;
        e["spatial_sq"] = r.spatial_sq;
        e["parametric_sq"] = r.parametric_sq;
        e["index_sq"] = r.index_sq;
        e["marked"] = index_list(r.marked);
        e["marked_sq"] = r.marked_sq;
        e["decision"] = to_string(r.decision);
        e["dofs_total"] = r.dofs_total;
        e["dofs_free"] = r.dofs_free;
        e["energy_sq"] = r.energy_sq;
        e["solver_iterations"] = r.solver_iterations;
        e["solver_residual"] = r.solver_residual;
        e["seconds"] = r.seconds;
        if (r.theta_eff > 0.0) e["theta_eff"] = r.theta_eff;
        its.push_back(e);
    }
    j["iterations"] = its;
    return j.dump();
}

void AdaptTrace::write_csv(std::ostream& os) const {
    os << "k,h,level,n_P,n_Q,spatial_estimate,parametric_estimate,eta,decision,N_k,theta_eff\n";
    os << std::setprecision(6);
    for (const auto& r : iterations) {
        os << r.k << ',' << r.h << ',' << r.level << ',' << r.P.size() << ',' << r.Q.size() << ','
           << std::sqrt(r.spatial_sq) << ',' << std::sqrt(r.parametric_sq) << ',' << r.eta << ','
           << to_string(r.decision) << ',' << r.dofs_total << ',';
        if (r.theta_eff > 0.0) os << r.theta_eff;
        os << '\n';
    }
}

} // namespace sgfem::adaptive
