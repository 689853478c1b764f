#pragma once

namespace loaddev {

/// log of the complete beta function B(a, b).
double log_beta(double a, double b);

/// Regularized incomplete beta function I_x(a, b) for x in [0, 1], a, b > 0.
/// Continued-fraction evaluation (modified Lentz), switching to the
/// symmetric complement when x > (a + 1) / (a + b + 2).  Absolute error
/// is well below 1e-12 over the df ranges used here.
double regularized_incomplete_beta(double x, double a, double b);

/// Upper-tail probability P(F > f) for an F distribution with df1 numerator
/// and df2 denominator degrees of freedom, computed as
/// I_x(df2/2, df1/2) with x = df2 / (df2 + df1 * f).
///
/// f must be finite and >= 0; df1, df2 >= 1.  Throws ValidationError on bad
/// arguments and ComputationError if the continued fraction fails to
/// converge.
double f_pvalue(double f, int df1, int df2);

}  // namespace loaddev
