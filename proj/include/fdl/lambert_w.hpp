#pragma once

namespace fdl {

/// Principal branch W0 of the Lambert W function, z >= -1/e.
/// Halley iteration to 1e-12 absolute tolerance.
double lambert_w0(double z);

/// W0(exp(x)) evaluated without forming exp(x), so it stays finite for
/// arguments far beyond the double range of exp.
double lambert_w0_exp(double x);

}  // namespace fdl
