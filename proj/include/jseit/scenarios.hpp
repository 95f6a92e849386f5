// Preset anomaly configurations on the 10 x 7 elliptic domain.

#ifndef JSEIT_SCENARIOS_HPP
#define JSEIT_SCENARIOS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

#include "jseit/geometry.hpp"

namespace jseit {

// Two unit disks with a unit gap; sigma 2 (left) and 5 (right).
inline Scenario sparse_target_a() {
    Scenario s;
    s.name = "sparseA";
    s.anomalies = {{AnomalyShape::disk({-1.5, 0.0}, 1.0), 2.0}, {AnomalyShape::disk({1.5, 0.0}, 1.0), 5.0}};
    return s;
}

// Three disks of different size; sigma 0.5, 5 and 2 from left to right.
// Radii are chosen so that 28 grid cells (56 current unknowns) are anomalous
// at h = 0.5.
inline Scenario sparse_target_b() {
    Scenario s;
    s.name = "sparseB";
    s.anomalies = {{AnomalyShape::disk({-4.0, 1.5}, 1.0), 0.5},
                   {AnomalyShape::disk({0.0, -1.0}, 0.5), 5.0},
                   {AnomalyShape::disk({4.0, 2.0}, 0.8), 2.0}};
    return s;
}

inline Scenario extended_target() {
    Scenario s;
    s.name = "kite";
    s.anomalies = {{AnomalyShape::kite({0.0, 0.0}, 1.5), 5.0}};
    return s;
}

inline Scenario scenario_by_name(std::string_view name) {
    if (name == "sparseA") return sparse_target_a();
    if (name == "sparseB") return sparse_target_b();
    if (name == "kite") return extended_target();
    throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

}  // namespace jseit

#endif  // JSEIT_SCENARIOS_HPP
