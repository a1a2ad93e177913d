#include "grownet/activation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace grownet {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct MishParts {
    double u;    // tanh(softplus(x))
    double du;   // u'
    double d2u;  // u''
};

MishParts mish_parts(double x) {
    const double s = sigmoid(x);
    const double u = std::tanh(softplus(x));
    const double g = 1.0 - u * u;
    const double du = g * s;
    const double d2u = -2.0 * u * du * s + g * s * (1.0 - s);
    return {u, du, d2u};
}

BaseFunction parse_base(std::string_view name) {
    if (name == "swish") return BaseFunction::Swish;
    if (name == "tanh") return BaseFunction::Tanh;
    if (name == "mish") return BaseFunction::Mish;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(BaseFunction f) {
    switch (f) {
        case BaseFunction::Swish: return "swish";
        case BaseFunction::Tanh: return "tanh";
        case BaseFunction::Mish: return "mish";
    }
    return "?";
}

double base_eval(BaseFunction f, double x) {
    switch (f) {
        case BaseFunction::Swish: return x * sigmoid(x);
        case BaseFunction::Tanh: return std::tanh(x);
        case BaseFunction::Mish: return x * std::tanh(softplus(x));
    }
    return 0.0;
}

double base_d1(BaseFunction f, double x) {
    switch (f) {
        case BaseFunction::Swish: {
            const double s = sigmoid(x);
            return s + x * s * (1.0 - s);
        }
        case BaseFunction::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case BaseFunction::Mish: {
            const auto m = mish_parts(x);
            return m.u + x * m.du;
        }
    }
    return 0.0;
}

double base_d2(BaseFunction f, double x) {
    switch (f) {
        case BaseFunction::Swish: {
            const double s = sigmoid(x);
            const double ds = s * (1.0 - s);
            return 2.0 * ds + x * ds * (1.0 - 2.0 * s);
        }
        case BaseFunction::Tanh: {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        }
        case BaseFunction::Mish: {
            const auto m = mish_parts(x);
            return 2.0 * m.du + x * m.d2u;
        }
    }
    return 0.0;
}

ActivationSpec make_admissible(std::string_view pair) {
    std::string key(pair);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::erase_if(key, [](unsigned char c) { return std::isspace(c) != 0; });
    const auto sep = key.find_first_of("+,_");
    if (sep == std::string::npos)
        throw std::invalid_argument("activation pair '" + std::string(pair) + "' has no separator");
    const std::string a = key.substr(0, sep);
    const std::string b = key.substr(sep + 1);
    const bool known = (a == "swish" && b == "tanh") || (a == "mish" && b == "tanh") ||
                       (a == "swish" && b == "mish");
    if (!known)
        throw std::invalid_argument("unsupported activation pair '" + std::string(pair) +
                                    "' (expected swish+tanh, mish+tanh or swish+mish)");

    ActivationSpec spec;
    spec.first = parse_base(a);
    spec.second = parse_base(b);
    spec.name = a + "+" + b;
    const double first_slope = base_d1(spec.first, 0.0);
    if (first_slope == 0.0) throw std::invalid_argument("sigma_1'(0) must be nonzero");
    spec.alpha1 = -base_d1(spec.second, 0.0) / first_slope;
    spec.curvature_at_zero = spec.d2(0.0);
    return spec;
}

double second_derivative_at_zero(const ActivationSpec& spec) { return spec.d2(0.0); }

}  // namespace grownet
