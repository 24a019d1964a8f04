#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace splitwiper {

struct GradCheckDraw {
    std::vector<std::size_t> dims;
    std::size_t batch_rows = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::uint64_t seed = 0;
    std::size_t draws = 0;
    double max_rel_err = 0.0;
    double tolerance = 1e-6;
    bool pass = false;
    std::vector<GradCheckDraw> per_draw;

    nlohmann::json to_json() const;
};

/// Checks backprop against central finite differences (step 1e-6) on random
/// small models and batches. Relative error uses a 1e-3 floor in the
/// denominator so near-zero gradients are judged absolutely. Batches whose
/// pre-activations sit within 1e-4 of a ReLU kink are redrawn, since the
/// difference quotient is meaningless across the kink. corrupt_layer, when
/// >= 0, scales that layer's analytic weight gradient by 1.0001 in every
/// draw to prove the check catches broken backward passes.
GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t draws = 24,
                              int corrupt_layer = -1);

}  // namespace splitwiper
