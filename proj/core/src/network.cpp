#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowbots/circuit.hpp"
#include "flowbots/errors.hpp"

namespace flowbots {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

void validate_law(const Element& e) {
    const auto fail = [&](const std::string& what) {
        throw DomainError("element '" + e.id + "': " + what);
    };
    std::visit(Overloaded{
                   [&](const Channel& c) {
                       if (!positive_finite(c.length)) fail("channel length must be positive");
                       if (!positive_finite(c.hydraulic_diameter))
                           fail("channel hydraulic_diameter must be positive");
                       if (!(std::abs(c.asymmetry) < 1.0)) fail("channel asymmetry must lie in (-1, 1)");
                   },
                   [&](const Constriction& c) {
                       if (!positive_finite(c.reference_area)) fail("reference_area must be positive");
                       if (!positive_finite(c.discharge_coefficient))
                           fail("discharge_coefficient must be positive");
                       if (!(c.opening >= 0.0 && c.opening <= 1.0)) fail("opening must lie in [0, 1]");
                   },
                   [&](const TeslaValve& t) {
                       if (!positive_finite(t.base_resistance)) fail("base_resistance must be positive");
                       if (!(t.diodicity > 1.0) || !std::isfinite(t.diodicity))
                           fail("diodicity must exceed 1");
                   },
                   [&](const FlowSource& s) {
                       if (!std::isfinite(s.q_set)) fail("q_set must be finite");
                   },
                   [&](const PressureSource& s) {
                       if (!std::isfinite(s.p_set)) fail("p_set must be finite");
                   },
                   [&](const ComplianceChamber& c) {
                       if (!positive_finite(c.rest_volume)) fail("rest_volume must be positive");
                       if (!positive_finite(c.compliance)) fail("compliance must be positive");
                       if (!std::isfinite(c.initial_pressure)) fail("initial_pressure must be finite");
                   },
               },
               e.law);
}

}  // namespace

bool Element::is_passive() const {
    return std::holds_alternative<Channel>(law) || std::holds_alternative<Constriction>(law) ||
           std::holds_alternative<TeslaValve>(law);
}

bool Element::is_source() const {
    return std::holds_alternative<FlowSource>(law) || std::holds_alternative<PressureSource>(law);
}

Network& Network::add_node(const std::string& id) {
    if (has_node(id)) throw ConfigurationError("duplicate node id '" + id + "'");
    node_index_.emplace(id, nodes_.size());
    nodes_.push_back(Node{id, Interior{}});
    return *this;
}

Network& Network::add_reservoir(const std::string& id, double pressure) {
    if (has_node(id)) throw ConfigurationError("duplicate node id '" + id + "'");
    node_index_.emplace(id, nodes_.size());
    nodes_.push_back(Node{id, Reservoir{pressure}});
    return *this;
}

Network& Network::add_element(Element element) {
    if (has_element(element.id)) {
        throw ConfigurationError("duplicate element id '" + element.id + "'");
    }
    element_index_.emplace(element.id, elements_.size());
    elements_.push_back(std::move(element));
    return *this;
}

Network& Network::add_element(const std::string& id, const std::string& from,
                              const std::string& to, ElementLaw law) {
    return add_element(Element{id, from, to, std::move(law)});
}

std::size_t Network::node_index(const std::string& id) const {
    const auto it = node_index_.find(id);
    if (it == node_index_.end()) throw LookupError("unknown node '" + id + "'");
    return it->second;
}

std::size_t Network::element_index(const std::string& id) const {
    const auto it = element_index_.find(id);
    if (it == element_index_.end()) throw LookupError("unknown element '" + id + "'");
    return it->second;
}

void Network::set_opening(const std::string& element_id, double opening) {
    auto& e = element(element_id);
    auto* c = std::get_if<Constriction>(&e.law);
    if (c == nullptr) {
        throw ConfigurationError("element '" + element_id + "' is not a constriction");
    }
    if (!(opening >= 0.0 && opening <= 1.0)) {
        throw DomainError("opening for '" + element_id + "' must lie in [0, 1]");
    }
    c->opening = opening;
}

double Network::opening(const std::string& element_id) const {
    const auto* c = std::get_if<Constriction>(&element(element_id).law);
    if (c == nullptr) {
        throw ConfigurationError("element '" + element_id + "' is not a constriction");
    }
    return c->opening;
}

void Network::set_source_value(const std::string& element_id, double value) {
    auto& e = element(element_id);
    if (auto* f = std::get_if<FlowSource>(&e.law)) {
        f->q_set = value;
    } else if (auto* p = std::get_if<PressureSource>(&e.law)) {
        p->p_set = value;
    } else {
        throw ConfigurationError("element '" + element_id + "' is not a source");
    }
}

void Network::merge(const Network& other, const std::string& prefix,
                    const std::map<std::string, std::string>& bindings) {
    const auto mapped = [&](const std::string& id) {
        const auto it = bindings.find(id);
        return it != bindings.end() ? it->second : prefix + id;
    };
    for (const auto& n : other.nodes()) {
        if (const auto it = bindings.find(n.id); it != bindings.end()) {
            if (!has_node(it->second)) {
                throw LookupError("bound node '" + it->second + "' missing in target");
            }
            continue;
        }
        const std::string id = prefix + n.id;
        if (has_node(id)) throw ConfigurationError("duplicate node id '" + id + "'");
        node_index_.emplace(id, nodes_.size());
        nodes_.push_back(Node{id, n.kind});
    }
    for (const auto& e : other.elements()) {
        add_element(Element{prefix + e.id, mapped(e.from), mapped(e.to), e.law});
    }
}

void Network::validate() const {
    fluid_.validate();
    if (nodes_.empty()) throw ConfigurationError("network has no nodes");
    for (const auto& e : elements_) {
        if (!has_node(e.from)) {
            throw ConfigurationError("element '" + e.id + "' references unknown node '" + e.from + "'");
        }
        if (!has_node(e.to)) {
            throw ConfigurationError("element '" + e.id + "' references unknown node '" + e.to + "'");
        }
        if (e.from == e.to) throw ConfigurationError("element '" + e.id + "' has from == to");
        validate_law(e);
    }
    for (const auto& n : nodes_) {
        if (const auto* r = std::get_if<Reservoir>(&n.kind); r && !std::isfinite(r->pressure)) {
            throw DomainError("reservoir '" + n.id + "' pressure must be finite");
        }
    }
}

// ---------------------------------------------------------------------------

double SteadyState::pressure(const std::string& node_id) const {
    const auto it = node_pressures.find(node_id);
    if (it == node_pressures.end()) throw LookupError("no pressure for node '" + node_id + "'");
    return it->second;
}

double SteadyState::flow(const std::string& element_id) const {
    const auto it = element_flows.find(element_id);
    if (it == element_flows.end()) throw LookupError("no flow for element '" + element_id + "'");
    return it->second;
}

double PowerAudit::relative_mismatch() const {
    const double scale = std::max(std::abs(source_power), std::abs(dissipated_power));
    if (scale == 0.0) return 0.0;
    return std::abs(source_power - dissipated_power) / scale;
}

bool PowerAudit::balanced(double tol_energy) const {
    // Absolute floor for numerically zero-flow states.
    const double scale = std::max(std::abs(source_power), std::abs(dissipated_power));
    return scale < 1e-18 || relative_mismatch() <= tol_energy;
}

double channel_resistance(const Channel& channel, const Fluid& fluid) {
    if (!(channel.hydraulic_diameter > 0.0) || !(channel.length > 0.0)) {
        throw DomainError("channel geometry must be positive");
    }
    const double d2 = channel.hydraulic_diameter * channel.hydraulic_diameter;
    return 128.0 * fluid.dynamic_viscosity * channel.length / (std::numbers::pi * d2 * d2);
}

double channel_inertance(const Channel& channel, const Fluid& fluid) {
    const double area =
        std::numbers::pi * channel.hydraulic_diameter * channel.hydraulic_diameter / 4.0;
    return fluid.density_ref * channel.length / area;
}

double constriction_coefficient(const Constriction& constriction, const Fluid& fluid) {
    if (!(constriction.reference_area > 0.0) || !(constriction.discharge_coefficient > 0.0)) {
        throw DomainError("constriction area and discharge coefficient must be positive");
    }
    if (!(constriction.opening > 0.0)) throw BlockedElementError("constriction is closed");
    const double eff =
        constriction.discharge_coefficient * constriction.reference_area * constriction.opening;
    return fluid.density_ref / (2.0 * eff * eff);
}

PowerAudit power_audit(const SteadyState& state, const Network& network) {
    PowerAudit audit;
    for (const auto& e : network.elements()) {
        const double q = state.flow(e.id);
        const double drop = state.pressure(e.from) - state.pressure(e.to);
        if (e.is_source()) {
            audit.source_power += -drop * q;
        } else if (e.is_passive()) {
            audit.dissipated_power += drop * q;
        } else {
            // Chambers exchange stored energy, zero at steady state.
            audit.source_power += -drop * q;
        }
    }
    // Reservoirs at non-zero gauge pressure inject p * (net outflow).
    std::vector<double> net_out(network.nodes().size(), 0.0);
    for (const auto& e : network.elements()) {
        const double q = state.flow(e.id);
        net_out[network.node_index(e.from)] += q;
        net_out[network.node_index(e.to)] -= q;
    }
    for (std::size_t i = 0; i < network.nodes().size(); ++i) {
        if (const auto* r = std::get_if<Reservoir>(&network.nodes()[i].kind)) {
            audit.source_power += r->pressure * net_out[i];
        }
    }
    return audit;
}

// ---------------------------------------------------------------------------

ControlSchedule::ControlSchedule(std::vector<Event> events) {
    for (auto& e : events) add(e.time, std::move(e.openings), std::move(e.source_values));
}

void ControlSchedule::add(double time, std::map<std::string, double> openings,
                          std::map<std::string, double> source_values) {
    if (!std::isfinite(time) || time < 0.0) throw DomainError("schedule times must be >= 0");
    // Stable insertion keeps same-time events in declaration order.
    const auto pos = std::upper_bound(events_.begin(), events_.end(), time,
                                      [](double t, const Event& e) { return t < e.time; });
    events_.insert(pos, Event{time, std::move(openings), std::move(source_values)});
}

std::map<std::string, double> ControlSchedule::openings_at(double t) const {
    std::map<std::string, double> out;
    for (const auto& e : events_) {
        if (e.time > t) break;
        for (const auto& [id, v] : e.openings) out[id] = v;
    }
    return out;
}

std::map<std::string, double> ControlSchedule::source_values_at(double t) const {
    std::map<std::string, double> out;
    for (const auto& e : events_) {
        if (e.time > t) break;
        for (const auto& [id, v] : e.source_values) out[id] = v;
    }
    return out;
}

void ControlSchedule::apply(double t, Network& network) const {
    for (const auto& [id, v] : openings_at(t)) network.set_opening(id, v);
    for (const auto& [id, v] : source_values_at(t)) network.set_source_value(id, v);
}

}  // namespace flowbots
