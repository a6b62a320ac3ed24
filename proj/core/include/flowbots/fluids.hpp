#pragma once

#include <string>
#include <variant>

namespace flowbots {

struct Incompressible {};

struct IdealGas {
    double specific_gas_constant = 287.0;  // J/(kg K)
    double temperature = 293.15;           // K
};

using Compressibility = std::variant<Incompressible, IdealGas>;

// Working-medium properties. Immutable value type.
struct Fluid {
    std::string name;
    double density_ref = 0.0;        // kg/m^3, used by volume-flow laws
    double dynamic_viscosity = 0.0;  // Pa s
    Compressibility compressibility = Incompressible{};

    bool is_compressible() const { return std::holds_alternative<IdealGas>(compressibility); }

    // Throws DomainError when any invariant is broken.
    void validate() const;
};

// Density at an absolute pressure. Incompressible fluids return density_ref.
double density_at(const Fluid& fluid, double pressure_abs);

double kinematic_viscosity(const Fluid& fluid, double pressure_abs);

// Reference fluids. These are starting points; scenarios may override any field.
Fluid water_20c();
Fluid air_20c();

}  // namespace flowbots
