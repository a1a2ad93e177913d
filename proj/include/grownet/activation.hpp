#pragma once

#include <cmath>
#include <string>
#include <string_view>

namespace grownet {

/// Smooth scalar functions the admissible activation is mixed from.
enum class BaseFunction { Swish, Tanh, Mish };

std::string_view to_string(BaseFunction f);

/// f, f' and f'' at x, evaluated in closed form.
double base_eval(BaseFunction f, double x);
double base_d1(BaseFunction f, double x);
double base_d2(BaseFunction f, double x);

/// sigma(x) = alpha1 * first(x) + second(x), with alpha1 chosen so that
/// sigma'(0) = 0. Both base functions vanish at 0, hence sigma(0) = 0 too,
/// which makes a zero-weight residual layer an exact identity whose
/// parameter gradients vanish.
struct ActivationSpec {
    std::string name;  // e.g. "swish+tanh"
    BaseFunction first = BaseFunction::Swish;
    BaseFunction second = BaseFunction::Tanh;
    double alpha1 = 0.0;
    double curvature_at_zero = 0.0;  // sigma''(0)

    double eval(double x) const { return alpha1 * base_eval(first, x) + base_eval(second, x); }
    double d1(double x) const { return alpha1 * base_d1(first, x) + base_d1(second, x); }
    double d2(double x) const { return alpha1 * base_d2(first, x) + base_d2(second, x); }
};

/// Accepts "swish+tanh", "mish+tanh" and "swish+mish" (case-insensitive,
/// '+', ',' or '_' as separator). The first name is sigma_1.
/// Throws std::invalid_argument for anything else.
ActivationSpec make_admissible(std::string_view pair);

double second_derivative_at_zero(const ActivationSpec& spec);

/// Activations of the non-residual maps.
enum class PlainActivation { Tanh, Identity };

inline double plain_eval(PlainActivation a, double x) {
    return a == PlainActivation::Tanh ? std::tanh(x) : x;
}

inline double plain_d1(PlainActivation a, double x) {
    if (a == PlainActivation::Identity) return 1.0;
    const double t = std::tanh(x);
    return 1.0 - t * t;
}

}  // namespace grownet
