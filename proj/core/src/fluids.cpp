#include "flowbots/fluids.hpp"

#include <cmath>

#include "flowbots/errors.hpp"

namespace flowbots {

void Fluid::validate() const {
    if (!(density_ref > 0.0) || !std::isfinite(density_ref)) {
        throw DomainError("fluid '" + name + "': density_ref must be positive");
    }
    if (!(dynamic_viscosity > 0.0) || !std::isfinite(dynamic_viscosity)) {
        throw DomainError("fluid '" + name + "': dynamic_viscosity must be positive");
    }
    if (const auto* gas = std::get_if<IdealGas>(&compressibility)) {
        if (!(gas->temperature > 0.0)) {
            throw DomainError("fluid '" + name + "': temperature must be positive");
        }
        if (!(gas->specific_gas_constant > 0.0)) {
            throw DomainError("fluid '" + name + "': specific_gas_constant must be positive");
        }
    }
}

double density_at(const Fluid& fluid, double pressure_abs) {
    if (!(pressure_abs > 0.0)) {
        throw DomainError("density_at: absolute pressure must be positive");
    }
    if (const auto* gas = std::get_if<IdealGas>(&fluid.compressibility)) {
        return pressure_abs / (gas->specific_gas_constant * gas->temperature);
    }
    return fluid.density_ref;
}

double kinematic_viscosity(const Fluid& fluid, double pressure_abs) {
    return fluid.dynamic_viscosity / density_at(fluid, pressure_abs);
}

Fluid water_20c() {
    return Fluid{"water_20C", 998.0, 1.0e-3, Incompressible{}};
}

Fluid air_20c() {
    // density_ref is the ideal-gas density at one standard atmosphere.
    const IdealGas gas{287.0, 293.15};
    return Fluid{"air_20C", 101325.0 / (gas.specific_gas_constant * gas.temperature), 1.8e-5, gas};
}

}  // namespace flowbots
