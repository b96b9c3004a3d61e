#pragma once

// Bundled case-study data: Antoine parameters and the measured experiments,
// with the design stages assembled from them.

#include "core.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace seqoed::fixtures {

inline constexpr std::string_view kAntoineJson = R"json(
[
  {"component": "propanol", "A": 4.65413, "B": 1292.869, "C": -91.992},
  {"component": "propyl acetate", "A": 3.84871, "B": 1088.392, "C": -90.571}
]
)json";

/// Every measured experiment, in the order initial design, factorial batches
/// 0-2, optimal batches 0-2. Labels name the batch each row belongs to.
inline constexpr std::string_view kMeasurementsCsv = R"csv(design_label,l_planned,l_actual,P_planned,P_actual,v,T,sigma_v,sigma_T
init,0.050000,0.0456,100000.0,99990.0,0.0813,372.21,0.0015,0.03
init,0.050000,0.6961,300000.0,299970.0,0.7243,401.50,0.0015,0.03
init,0.500000,0.4466,200000.0,199950.0,0.5257,389.12,0.0015,0.03
init,0.950000,0.9728,100000.0,99990.0,0.9611,369.16,0.0015,0.03
init,0.950000,0.9642,300000.0,299981.6,0.9546,401.46,0.0015,0.03
init,0.612500,0.6426,200000.0,199950.0,0.6730,388.14,0.0015,0.03
fed0+,0.050000,0.0444,200000.0,199950.0,0.0815,396.06,0.0015,0.03
fed0+,0.500000,0.4469,100000.0,99990.0,0.4979,367.32,0.0015,0.03
fed0+,0.500000,0.3538,300000.0,299981.6,0.4560,404.32,0.0015,0.03
fed0+,0.950000,0.9685,200000.0,199950.0,0.9525,388.73,0.0015,0.03
fed1+,0.275000,0.2440,100000.0,99990.0,0.3341,368.70,0.0015,0.03
fed1+,0.275000,0.2429,200000.0,199950.0,0.3431,391.58,0.0015,0.03
fed1+,0.275000,0.1168,300000.0,299981.6,0.1933,409.82,0.0015,0.03
fed1+,0.725000,0.6974,100000.0,99990.0,0.6750,367.12,0.0015,0.03
fed1+,0.725000,0.6958,200000.0,199950.0,0.7099,387.82,0.0015,0.03
fed1+,0.725000,0.5809,300000.0,299981.6,0.6499,402.05,0.0015,0.03
fed2+,0.162500,0.1503,100000.0,99990.0,0.2385,369.95,0.0015,0.03
fed2+,0.162500,0.1486,200000.0,199950.0,0.2432,393.22,0.0015,0.03
fed2+,0.162500,0.0454,300000.0,299981.6,0.0815,411.82,0.0015,0.03
fed2+,0.387500,0.3707,100000.0,99990.0,0.4378,367.46,0.0015,0.03
fed2+,0.387500,0.3697,200000.0,199950.0,0.4430,389.46,0.0015,0.03
fed2+,0.387500,0.2346,300000.0,299981.6,0.3424,406.86,0.0015,0.03
fed2+,0.612500,0.6037,100000.0,99990.0,0.6026,367.05,0.0015,0.03
fed2+,0.612500,0.6426,200000.0,199950.0,0.6730,388.14,0.0015,0.03
fed2+,0.612500,0.4356,300000.0,299981.6,0.5353,403.59,0.0015,0.03
fed2+,0.837500,0.9168,100000.0,99990.0,0.8869,368.41,0.0015,0.03
fed2+,0.837500,0.9037,200000.0,199950.0,0.8887,388.39,0.0015,0.03
fed2+,0.837500,0.9067,300000.0,299981.6,0.8903,401.36,0.0015,0.03
oed0+,0.222222,0.1731,300000.0,299981.6,0.2748,407.73,0.0015,0.03
oed0+,0.444444,0.3878,100000.0,99990.0,0.4561,367.49,0.0015,0.03
oed0+,0.666667,0.6520,300000.0,299981.6,0.6952,401.62,0.0015,0.03
oed1+,0.111111,0.1018,100000.0,99990.0,0.1721,370.81,0.0015,0.03
oed1+,0.444444,0.4518,100000.0,99990.0,0.4992,367.23,0.0015,0.03
oed1+,0.888889,0.8845,100000.0,99990.0,0.8459,368.03,0.0015,0.03
oed2+,0.111111,0.1094,100000.0,99990.0,0.1803,370.68,0.0015,0.03
oed2+,0.222222,0.2385,300000.0,300000.0,0.3466,406.26,0.0015,0.03
oed2+,0.666667,0.7372,300000.0,300000.0,0.7586,401.28,0.0015,0.03
)csv";

/// Design stages and the row indices (into kMeasurementsCsv) they consist of.
/// fed0 is the initial design without its off-center sixth point; oed0 = init.
inline std::vector<std::size_t> stage_rows(std::string_view stage)
{
    auto range = [](std::size_t a, std::size_t b, std::vector<std::size_t> v = {}) {
        for (std::size_t i = a; i <= b; ++i)
            v.push_back(i);
        return v;
    };
    if (stage == "init" || stage == "oed0")
        return range(0, 5);
    if (stage == "fed0")
        return range(0, 4);
    if (stage == "fed1")
        return range(6, 9, range(0, 4));
    if (stage == "fed2")
        return range(6, 15, range(0, 4));
    if (stage == "fed3")
        return range(6, 27, range(0, 4));
    if (stage == "oed1")
        return range(28, 30, range(0, 5));
    if (stage == "oed2")
        return range(28, 33, range(0, 5));
    if (stage == "oed3")
        return range(28, 36, range(0, 5));
    if (stage == "tot")
        return range(6, 36, range(0, 4));
    throw DomainError("unknown design stage '" + std::string(stage) + "'");
}

inline const std::vector<std::string>& stage_names()
{
    static const std::vector<std::string> names{"init", "oed1", "oed2", "oed3", "fed1", "fed2", "fed3", "tot"};
    return names;
}

/// Alternative assignment of actual inputs to rows, as a list of row pairs
/// whose (l', P') are exchanged. With it, the linearized worst-case
/// uncertainties of all stages agree with the published summary values; with
/// the rows as printed, the stages containing rows 1 or 8 but not their
/// partners do not.
inline const std::vector<std::pair<std::size_t, std::size_t>>& reconciled_input_swaps()
{
    static const std::vector<std::pair<std::size_t, std::size_t>> swaps{{1, 18}, {8, 24}};
    return swaps;
}

} // namespace seqoed::fixtures
