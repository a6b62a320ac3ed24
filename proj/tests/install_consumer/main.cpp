#include <cmath>
#include <iostream>

#include "flowbots/assembly.hpp"
#include "flowbots/scenario.hpp"
#include "flowbots/teleop.hpp"

int main() {
    const auto rig = flowbots::make_rig(flowbots::ActuatorModel{}, flowbots::water_20c());
    const auto solution = flowbots::solve_assembly(rig);
    const auto gripper = flowbots::cli::parse_assembly_spec(R"({"kind": "gripper"})");
    const auto neutral = flowbots::teleop::neutral_roles(gripper);
    std::cout << solution.curvature().front() << ' ' << neutral.size() << '\n';
    return std::isfinite(solution.curvature().front()) && neutral.size() == 3 ? 0 : 1;
}
