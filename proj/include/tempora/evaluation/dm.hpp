#pragma once

#include <cstddef>
#include <string_view>

#include "tempora/evaluation/forecast_set.hpp"

namespace tempora::evaluation {

enum class DmLoss { Squared, Absolute };

DmLoss parse_dm_loss(std::string_view name);
std::string_view dm_loss_name(DmLoss loss);

struct DmResult {
    double statistic = 0.0; // negative when a has the smaller loss
    double p_value = 1.0;   // two-sided, standard normal
    std::size_t n = 0;
    std::size_t lags = 0;
};

// Diebold-Mariano test on the records at horizon h. Loss differentials
// d = L(e_a) - L(e_b) are ordered by (origin, sku); the long-run variance
// is Newey-West with h - 1 Bartlett lags. All-zero d gives (0, 1); zero
// variance with nonzero mean gives an infinite statistic and p = 0.
// Throws tempora::Error(ComparisonMismatch) naming the first key present
// in only one set.
DmResult dm_test(const ForecastSet& a, const ForecastSet& b, DmLoss loss, int h);

} // namespace tempora::evaluation
