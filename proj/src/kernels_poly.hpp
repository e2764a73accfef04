#pragma once

// Shared polynomial constants for the exp/softplus kernels. Both backends
// evaluate the same minimax-free Taylor/atanh expansions with the same
// operation order, so per-element results match bit for bit.

namespace bdice::kernels::detail {

inline constexpr double kLog2E = 1.44269504088896340736;
// ln2 split so n*LN2_HI is exact for the exponents that occur here.
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;

// exp overflows above / underflows to zero below these inputs.
inline constexpr double kExpHi = 709.782712893384;
inline constexpr double kExpLo = -745.133219101941;
inline constexpr double kExpClampHi = 710.0;
inline constexpr double kExpClampLo = -745.5;

// softplus(x) = exp(x) to full precision below this point.
inline constexpr double kSoftplusTiny = -37.0;

// Taylor coefficients 1/k! for exp on |r| <= ln2/2.
inline constexpr double kExpC[13] = {
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
};

// atanh series 1/(2k+1) for log(y), y in (1, 2]: log(y) = 2 s (1 + s^2/3 + ...)
// with s = (y-1)/(y+1) <= 1/3.
inline constexpr double kLogC[16] = {
    1.0,        1.0 / 3.0,  1.0 / 5.0,  1.0 / 7.0,  1.0 / 9.0,  1.0 / 11.0,
    1.0 / 13.0, 1.0 / 15.0, 1.0 / 17.0, 1.0 / 19.0, 1.0 / 21.0, 1.0 / 23.0,
    1.0 / 25.0, 1.0 / 27.0, 1.0 / 29.0, 1.0 / 31.0,
};

}  // namespace bdice::kernels::detail
