#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "flowbots/circuit.hpp"
#include "flowbots/errors.hpp"

namespace flowbots {

namespace {

enum class Mode { Steady, TransientInit, TransientStep };

struct StepInputs {
    double dt = 0.0;
    bool inertance = false;
    const std::vector<double>* chamber_mass = nullptr;
    const std::vector<double>* prev_flow = nullptr;
};

// Orifice law with the cubic blend inside |Q| < qs: g(Q) = a Q + b Q^3 with
// a = k qs / 2 and b = k / (2 qs). Value and slope match k Q|Q| at |Q| = qs.
double orifice_drop(double k, double q, double qs) {
    if (std::abs(q) >= qs) return k * q * std::abs(q);
    return 0.5 * k * qs * q + 0.5 * k / qs * q * q * q;
}

double orifice_slope(double k, double q, double qs) {
    if (std::abs(q) >= qs) return 2.0 * k * std::abs(q);
    return 0.5 * k * qs + 1.5 * k / qs * q * q;
}

double directional_resistance(double base, double forward_factor, double reverse_factor, double q) {
    return q >= 0.0 ? base * forward_factor : base * reverse_factor;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

// Index form of a network for one solve. Unknowns are the pressures of free
// nodes followed by the flows of active elements.
struct Compiled {
    const Network* net = nullptr;
    Mode mode = Mode::Steady;
    std::vector<int> node_var;        // -1 when pressure is fixed
    std::vector<double> fixed;        // pressure of fixed nodes
    std::vector<int> elem_var;        // -1 when the element carries no flow
    std::vector<std::size_t> from, to;
    std::vector<double> coef;         // R, k, I... precomputed per element
    std::vector<double> inertance;
    std::vector<int> row_is_flow;     // per element-row: 1 when residual is a flow
    int n_p = 0;
    int n = 0;
    double p_scale = 1.0;
    double q_scale = 1e-6;
};

bool element_active(const Element& e, Mode mode, double eps_open) {
    if (const auto* c = std::get_if<Constriction>(&e.law)) return c->opening >= eps_open;
    if (e.is_chamber()) return mode != Mode::Steady;
    return true;
}

Compiled compile(const Network& net, Mode mode, const SolverSettings& s, bool inertance) {
    Compiled c;
    c.net = &net;
    c.mode = mode;
    const auto& nodes = net.nodes();
    const auto& elems = net.elements();
    const std::size_t nn = nodes.size();
    const std::size_t ground = nn;

    c.from.resize(elems.size());
    c.to.resize(elems.size());
    std::vector<bool> active(elems.size());
    for (std::size_t i = 0; i < elems.size(); ++i) {
        c.from[i] = net.node_index(elems[i].from);
        c.to[i] = net.node_index(elems[i].to);
        active[i] = element_active(elems[i], mode, s.epsilon_open);
    }

    double p_ref = 0.0;
    int n_res = 0;
    for (const auto& node : nodes) {
        if (const auto* r = std::get_if<Reservoir>(&node.kind)) {
            p_ref += r->pressure;
            ++n_res;
        }
    }
    if (n_res > 0) p_ref /= n_res;

    const auto connectivity = [&](std::size_t skip) {
        UnionFind uf(nn + 1);
        for (std::size_t i = 0; i < nn; ++i) {
            if (nodes[i].is_reservoir()) uf.unite(i, ground);
        }
        for (std::size_t i = 0; i < elems.size(); ++i) {
            if (active[i] && i != skip) uf.unite(c.from[i], c.to[i]);
        }
        return uf;
    };

    for (std::size_t i = 0; i < elems.size(); ++i) {
        if (!active[i] || !std::holds_alternative<FlowSource>(elems[i].law)) continue;
        auto uf = connectivity(i);
        if (uf.find(c.from[i]) != uf.find(c.to[i])) {
            throw OpenCircuitError("flow source '" + elems[i].id + "' has no return path");
        }
    }

    auto uf = connectivity(elems.size());
    c.fixed.assign(nn, p_ref);
    c.node_var.assign(nn, -1);
    std::vector<bool> pinned_root(nn + 1, false);
    for (std::size_t i = 0; i < nn; ++i) {
        if (const auto* r = std::get_if<Reservoir>(&nodes[i].kind)) {
            c.fixed[i] = r->pressure;
            continue;
        }
        const std::size_t root = uf.find(i);
        if (root != uf.find(ground) && !pinned_root[root]) {
            // Floating component: its absolute level is free, pin one node.
            pinned_root[root] = true;
            continue;
        }
        c.node_var[i] = c.n_p++;
    }

    c.elem_var.assign(elems.size(), -1);
    c.coef.assign(elems.size(), 0.0);
    c.inertance.assign(elems.size(), 0.0);
    int next = c.n_p;
    const Fluid& fluid = net.fluid();
    std::vector<double> linear_r;
    double q_src = 0.0;
    c.p_scale = 1.0;
    for (std::size_t i = 0; i < nn; ++i) c.p_scale = std::max(c.p_scale, std::abs(c.fixed[i]));
    for (std::size_t i = 0; i < elems.size(); ++i) {
        const auto& e = elems[i];
        if (const auto* ch = std::get_if<Channel>(&e.law)) {
            c.coef[i] = channel_resistance(*ch, fluid);
            if (inertance) c.inertance[i] = channel_inertance(*ch, fluid);
            linear_r.push_back(c.coef[i]);
        } else if (const auto* tv = std::get_if<TeslaValve>(&e.law)) {
            c.coef[i] = tv->base_resistance;
            linear_r.push_back(c.coef[i]);
        } else if (const auto* co = std::get_if<Constriction>(&e.law)) {
            if (active[i]) c.coef[i] = constriction_coefficient(*co, fluid);
        } else if (const auto* fs = std::get_if<FlowSource>(&e.law)) {
            q_src = std::max(q_src, std::abs(fs->q_set));
        } else if (const auto* ps = std::get_if<PressureSource>(&e.law)) {
            c.p_scale = std::max(c.p_scale, std::abs(ps->p_set));
        } else if (const auto* cc = std::get_if<ComplianceChamber>(&e.law)) {
            c.p_scale = std::max(c.p_scale, std::abs(cc->initial_pressure));
        }
        if (active[i]) {
            c.elem_var[i] = next++;
            const bool flow_row = std::holds_alternative<FlowSource>(e.law) ||
                                  (e.is_chamber() && mode == Mode::TransientStep);
            c.row_is_flow.push_back(flow_row ? 1 : 0);
        }
    }
    c.n = next;

    if (!linear_r.empty()) {
        std::sort(linear_r.begin(), linear_r.end());
        const double r_typ = linear_r[linear_r.size() / 2];
        if (q_src > 0.0) c.p_scale = std::max(c.p_scale, q_src * r_typ);
        c.q_scale = c.p_scale / r_typ;
    }
    if (q_src > 0.0) c.q_scale = std::max(c.q_scale, q_src);
    return c;
}

struct Residual {
    Eigen::VectorXd f;
    double kcl_max = 0.0;
    double flow_row_max = 0.0;
    double p_row_max = 0.0;
};

class System {
public:
    System(const Compiled& c, const StepInputs& step, const SolverSettings& s,
           const std::vector<double>* orifice_r = nullptr)
        : c_(c), step_(step), s_(s), orifice_r_(orifice_r) {}

    double p(const Eigen::VectorXd& x, std::size_t node) const {
        const int v = c_.node_var[node];
        return v >= 0 ? x[v] : c_.fixed[node];
    }

    Residual residual(const Eigen::VectorXd& x) const {
        Residual r;
        r.f = Eigen::VectorXd::Zero(c_.n);
        eval(x, &r.f, nullptr);
        for (int i = 0; i < c_.n_p; ++i) r.kcl_max = std::max(r.kcl_max, std::abs(r.f[i]));
        for (int i = c_.n_p; i < c_.n; ++i) {
            const double a = std::abs(r.f[i]);
            if (c_.row_is_flow[i - c_.n_p]) {
                r.flow_row_max = std::max(r.flow_row_max, a);
            } else {
                r.p_row_max = std::max(r.p_row_max, a);
            }
        }
        return r;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(c_.n, c_.n);
        eval(x, nullptr, &j);
        return j;
    }

    double row_scale(int row) const {
        if (row < c_.n_p) return 1.0 / c_.q_scale;
        return c_.row_is_flow[row - c_.n_p] ? 1.0 / c_.q_scale : 1.0 / c_.p_scale;
    }

    double col_scale(int col) const { return col < c_.n_p ? c_.p_scale : c_.q_scale; }

    double merit(const Residual& r) const {
        double acc = 0.0;
        for (int i = 0; i < c_.n; ++i) {
            const double v = r.f[i] * row_scale(i);
            acc += v * v;
        }
        return std::sqrt(acc);
    }

private:
    void eval(const Eigen::VectorXd& x, Eigen::VectorXd* f, Eigen::MatrixXd* j) const {
        const auto& elems = c_.net->elements();
        const Fluid& fluid = c_.net->fluid();
        for (std::size_t i = 0; i < elems.size(); ++i) {
            const int qv = c_.elem_var[i];
            if (qv < 0) continue;
            const double q = x[qv];
            const std::size_t a = c_.from[i];
            const std::size_t b = c_.to[i];
            const int av = c_.node_var[a];
            const int bv = c_.node_var[b];
            const double pa = p(x, a);
            const double pb = p(x, b);

            // KCL contribution: flow leaves `a`, enters `b`.
            if (f) {
                if (av >= 0) (*f)[av] -= q;
                if (bv >= 0) (*f)[bv] += q;
            }
            if (j) {
                if (av >= 0) (*j)(av, qv) -= 1.0;
                if (bv >= 0) (*j)(bv, qv) += 1.0;
            }

            const int row = qv;
            // Element law row; d/dpa, d/dpb, d/dq.
            double val = 0.0;
            double dpa = 0.0;
            double dpb = 0.0;
            double dq = 0.0;
            const auto& law = elems[i].law;
            if (const auto* ch = std::get_if<Channel>(&law)) {
                const double r = directional_resistance(c_.coef[i], 1.0 + ch->asymmetry,
                                                        1.0 - ch->asymmetry, q);
                val = pa - pb - r * q;
                dpa = 1.0;
                dpb = -1.0;
                dq = -r;
                if (c_.mode == Mode::TransientStep && c_.inertance[i] > 0.0) {
                    const double inert = c_.inertance[i] / step_.dt;
                    val -= inert * (q - (*step_.prev_flow)[i]);
                    dq -= inert;
                }
            } else if (const auto* tv = std::get_if<TeslaValve>(&law)) {
                const double r = directional_resistance(c_.coef[i], 1.0, tv->diodicity, q);
                val = pa - pb - r * q;
                dpa = 1.0;
                dpb = -1.0;
                dq = -r;
            } else if (std::holds_alternative<Constriction>(law)) {
                dpa = 1.0;
                dpb = -1.0;
                if (orifice_r_) {
                    val = pa - pb - (*orifice_r_)[i] * q;
                    dq = -(*orifice_r_)[i];
                } else {
                    val = pa - pb - orifice_drop(c_.coef[i], q, s_.q_smooth);
                    dq = -orifice_slope(c_.coef[i], q, s_.q_smooth);
                }
            } else if (const auto* fs = std::get_if<FlowSource>(&law)) {
                val = q - fs->q_set;
                dq = 1.0;
            } else if (const auto* ps = std::get_if<PressureSource>(&law)) {
                val = pb - pa - ps->p_set;
                dpa = -1.0;
                dpb = 1.0;
            } else if (const auto* cc = std::get_if<ComplianceChamber>(&law)) {
                if (c_.mode == Mode::TransientInit) {
                    val = pa - pb - cc->initial_pressure;
                    dpa = 1.0;
                    dpb = -1.0;
                } else {
                    // Mass balance: rho(pa) Q dt = m(pa) - m_prev, with
                    // m = rho(pa) (V0 + C (pa - pb)).
                    const double m_prev = (*step_.chamber_mass)[i];
                    double rho = fluid.density_ref;
                    double drho = 0.0;
                    if (const auto* gas = std::get_if<IdealGas>(&fluid.compressibility)) {
                        const double p_abs = s_.ambient_pressure + pa;
                        rho = density_at(fluid, p_abs);
                        drho = 1.0 / (gas->specific_gas_constant * gas->temperature);
                    }
                    const double inv_dt = 1.0 / step_.dt;
                    val = q - (cc->rest_volume + cc->compliance * (pa - pb) - m_prev / rho) * inv_dt;
                    dq = 1.0;
                    dpa = -(cc->compliance + m_prev * drho / (rho * rho)) * inv_dt;
                    dpb = cc->compliance * inv_dt;
                }
            }
            if (f) (*f)[row] = val;
            if (j) {
                if (av >= 0) (*j)(row, av) += dpa;
                if (bv >= 0) (*j)(row, bv) += dpb;
                (*j)(row, qv) += dq;
            }
        }
    }

    const Compiled& c_;
    const StepInputs& step_;
    const SolverSettings& s_;
    const std::vector<double>* orifice_r_;  // secant resistances for the warm start
};

// Scaled Newton direction; throws OpenCircuitError on a singular Jacobian.
Eigen::VectorXd newton_direction(const System& sys, const Compiled& c, const Eigen::VectorXd& x,
                                 const Residual& res) {
    Eigen::MatrixXd jac = sys.jacobian(x);
    Eigen::VectorXd rhs(c.n);
    for (int r = 0; r < c.n; ++r) {
        const double rs = sys.row_scale(r);
        rhs[r] = -res.f[r] * rs;
        for (int col = 0; col < c.n; ++col) jac(r, col) *= rs * sys.col_scale(col);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
        throw OpenCircuitError("singular network equations (no return path or conflicting sources)");
    }
    Eigen::VectorXd dx = lu.solve(rhs);
    for (int col = 0; col < c.n; ++col) dx[col] *= sys.col_scale(col);
    return dx;
}

// Orifices make Newton from zero flow overshoot badly (the blended law is
// nearly flat there). Replace each orifice by a linear resistance, solve, and
// update the resistance towards the secant k |Q| until it settles.
void warm_start(const Compiled& c, const StepInputs& step, const SolverSettings& s, Eigen::VectorXd& x) {
    const auto& elems = c.net->elements();
    std::vector<double> r(elems.size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < elems.size(); ++i) {
        if (c.elem_var[i] >= 0 && std::holds_alternative<Constriction>(elems[i].law)) {
            r[i] = c.p_scale / c.q_scale;
            any = true;
        }
    }
    if (!any) return;
    for (int sweep = 0; sweep < 60; ++sweep) {
        const System lin(c, step, s, &r);
        const Residual res = lin.residual(x);
        const Eigen::VectorXd dx = newton_direction(lin, c, x, res);
        if (!dx.allFinite()) return;
        x += dx;
        double change = 0.0;
        for (std::size_t i = 0; i < elems.size(); ++i) {
            if (r[i] <= 0.0) continue;
            const double secant = std::max(c.coef[i] * std::abs(x[c.elem_var[i]]), 0.5 * c.coef[i] * s.q_smooth);
            const double next = std::sqrt(r[i] * secant);
            change = std::max(change, std::abs(std::log(next / r[i])));
            r[i] = next;
        }
        if (change < 1e-3) return;
    }
}

struct Guess {
    const std::vector<double>* node_pressures = nullptr;  // per node
    const std::vector<double>* element_flows = nullptr;   // per element
};

SteadyState newton(const Network& net, Mode mode, const SolverSettings& s, const StepInputs& step,
                   const Guess& guess, double time_stamp) {
    const Compiled c = compile(net, mode, s, step.inertance);
    const System sys(c, step, s);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(c.n);
    for (std::size_t i = 0; i < c.node_var.size(); ++i) {
        const int v = c.node_var[i];
        if (v < 0) continue;
        x[v] = guess.node_pressures ? (*guess.node_pressures)[i] : c.fixed[i];
    }
    if (guess.element_flows) {
        for (std::size_t i = 0; i < c.elem_var.size(); ++i) {
            if (c.elem_var[i] >= 0) x[c.elem_var[i]] = (*guess.element_flows)[i];
        }
    } else if (mode != Mode::TransientStep) {
        warm_start(c, step, s, x);
    }

    const double tol_p = 1e-11 * c.p_scale;
    const double tol_q = std::min(s.tol_kcl, 1e-11 * c.q_scale);
    const auto converged = [&](const Residual& r) {
        return r.kcl_max <= s.tol_kcl && r.flow_row_max <= tol_q && r.p_row_max <= tol_p;
    };
    const auto acceptable = [&](const Residual& r) {
        return r.kcl_max <= s.tol_kcl && r.flow_row_max <= s.tol_kcl && r.p_row_max <= 1e-7 * c.p_scale;
    };

    Residual res = sys.residual(x);
    double merit = sys.merit(res);
    int iter = 0;
    bool done = c.n == 0 || converged(res);
    while (!done) {
        if (iter >= s.max_iter) {
            if (acceptable(res)) break;
            throw ConvergenceError(
                fmt::format("Newton did not converge in {} iterations (residual {:.3e})", s.max_iter,
                            merit),
                merit, time_stamp);
        }
        ++iter;
        const Eigen::VectorXd dx = newton_direction(sys, c, x, res);
        if (!dx.allFinite()) throw ConvergenceError("non-finite Newton step", merit, time_stamp);

        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            Eigen::VectorXd trial = x + lambda * dx;
            Residual tr = sys.residual(trial);
            const double tm = sys.merit(tr);
            if (std::isfinite(tm) && (tm <= (1.0 - 1e-4 * lambda) * merit || converged(tr))) {
                x = std::move(trial);
                res = std::move(tr);
                merit = tm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            if (acceptable(res)) break;
            throw ConvergenceError(
                fmt::format("line search stalled (residual {:.3e})", merit), merit, time_stamp);
        }
        done = converged(res);
    }

    SteadyState out;
    const auto& nodes = net.nodes();
    const auto& elems = net.elements();
    for (std::size_t i = 0; i < nodes.size(); ++i) out.node_pressures[nodes[i].id] = sys.p(x, i);
    for (std::size_t i = 0; i < elems.size(); ++i) {
        out.element_flows[elems[i].id] = c.elem_var[i] >= 0 ? x[c.elem_var[i]] : 0.0;
    }
    out.residual_norm = res.kcl_max;
    out.element_residual = res.p_row_max;
    out.iterations = iter;
    return out;
}

std::vector<double> node_vector(const Network& net, const SteadyState& s) {
    std::vector<double> v;
    v.reserve(net.nodes().size());
    for (const auto& n : net.nodes()) v.push_back(s.pressure(n.id));
    return v;
}

std::vector<double> flow_vector(const Network& net, const SteadyState& s) {
    std::vector<double> v;
    v.reserve(net.elements().size());
    for (const auto& e : net.elements()) v.push_back(s.flow(e.id));
    return v;
}

}  // namespace

double element_pressure_drop(const Element& element, double flow, const Fluid& fluid,
                             double q_smooth) {
    if (const auto* ch = std::get_if<Channel>(&element.law)) {
        const double r = channel_resistance(*ch, fluid);
        return directional_resistance(r, 1.0 + ch->asymmetry, 1.0 - ch->asymmetry, flow) * flow;
    }
    if (const auto* tv = std::get_if<TeslaValve>(&element.law)) {
        if (!(tv->base_resistance > 0.0)) throw DomainError("tesla valve resistance must be positive");
        return directional_resistance(tv->base_resistance, 1.0, tv->diodicity, flow) * flow;
    }
    if (const auto* co = std::get_if<Constriction>(&element.law)) {
        if (!(co->opening > 0.0)) {
            throw BlockedElementError("constriction '" + element.id + "' is blocked");
        }
        return orifice_drop(constriction_coefficient(*co, fluid), flow, q_smooth);
    }
    throw DomainError("element '" + element.id + "' is not a passive law");
}

SteadyState solve_steady(const Network& network, const SolverSettings& settings) {
    network.validate();
    return newton(network, Mode::Steady, settings, StepInputs{}, Guess{}, -1.0);
}

// ---------------------------------------------------------------------------

TransientSimulator::TransientSimulator(Network network, SolverSettings settings,
                                       TransientOptions options)
    : network_(std::move(network)), settings_(settings), options_(options) {
    network_.validate();
}

const SteadyState& TransientSimulator::initialize() {
    state_ = newton(network_, Mode::TransientInit, settings_, StepInputs{}, Guess{}, 0.0);
    time_ = 0.0;
    initialized_ = true;
    const auto& elems = network_.elements();
    chamber_mass_.assign(elems.size(), 0.0);
    prev_flow_ = flow_vector(network_, state_);
    const Fluid& fluid = network_.fluid();
    for (std::size_t i = 0; i < elems.size(); ++i) {
        const auto* cc = std::get_if<ComplianceChamber>(&elems[i].law);
        if (!cc) continue;
        const double pa = state_.pressure(elems[i].from);
        const double pb = state_.pressure(elems[i].to);
        const double rho = fluid.is_compressible()
                               ? density_at(fluid, settings_.ambient_pressure + pa)
                               : fluid.density_ref;
        chamber_mass_[i] = rho * (cc->rest_volume + cc->compliance * (pa - pb));
    }
    return state_;
}

const SteadyState& TransientSimulator::step(double t_end, double dt) {
    if (!initialized_) initialize();
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    StepInputs in;
    in.dt = dt;
    in.inertance = options_.channel_inertance;
    in.chamber_mass = &chamber_mass_;
    in.prev_flow = &prev_flow_;
    const auto guess_p = node_vector(network_, state_);
    const auto guess_q = flow_vector(network_, state_);
    state_ = newton(network_, Mode::TransientStep, settings_, in, Guess{&guess_p, &guess_q}, t_end);
    time_ = t_end;

    const auto& elems = network_.elements();
    const Fluid& fluid = network_.fluid();
    for (std::size_t i = 0; i < elems.size(); ++i) {
        prev_flow_[i] = state_.flow(elems[i].id);
        const auto* cc = std::get_if<ComplianceChamber>(&elems[i].law);
        if (!cc) continue;
        const double pa = state_.pressure(elems[i].from);
        const double pb = state_.pressure(elems[i].to);
        const double rho = fluid.is_compressible()
                               ? density_at(fluid, settings_.ambient_pressure + pa)
                               : fluid.density_ref;
        chamber_mass_[i] = rho * (cc->rest_volume + cc->compliance * (pa - pb));
    }
    return state_;
}

std::map<std::string, double> TransientSimulator::chamber_volumes() const {
    std::map<std::string, double> out;
    for (const auto& e : network_.elements()) {
        const auto* cc = std::get_if<ComplianceChamber>(&e.law);
        if (!cc) continue;
        const double dp = state_.pressure(e.from) - state_.pressure(e.to);
        out[e.id] = cc->rest_volume + cc->compliance * dp;
    }
    return out;
}

TransientTrace simulate_transient(const Network& network, const ControlSchedule& schedule,
                                  double t_end, double dt, const SolverSettings& settings,
                                  const TransientOptions& options) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be >= 0");

    Network start = network;
    schedule.apply(0.0, start);
    TransientSimulator sim(std::move(start), settings, options);

    TransientTrace trace;
    trace.times.push_back(0.0);
    trace.snapshots.push_back(sim.initialize());
    trace.chamber_volumes.push_back(sim.chamber_volumes());

    // Step end times are k * dt, computed by multiplication so that a live
    // fixed-rate loop using the same formula lands on identical instants.
    const auto n_steps = static_cast<long long>(std::ceil(t_end / dt - 1e-9));
    double t_prev = 0.0;
    for (long long k = 1; k <= n_steps; ++k) {
        const double t = std::min(static_cast<double>(k) * dt, t_end);
        sim.apply(schedule, t);
        trace.snapshots.push_back(sim.step(t, t - t_prev));
        trace.times.push_back(t);
        trace.chamber_volumes.push_back(sim.chamber_volumes());
        t_prev = t;
    }
    return trace;
}

}  // namespace flowbots
