#include "cdr/gauss2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "cdr/errors.hpp"

namespace cdr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Gauss-Legendre half-rules on [-1, 1] (nodes > 0, symmetric partner implied).
constexpr double kGl6W[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr double kGl6X[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
constexpr double kGl12W[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                              0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
constexpr double kGl12X[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                              0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
constexpr double kGl20W[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                               0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                               0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                               0.1527533871307259};
constexpr double kGl20X[10] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                               0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                               0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                               0.07652652113349733};

void check_rho(double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw std::domain_error("correlation outside [-1, 1]");
  }
}

void require_open_rho(double rho) {
  check_rho(rho);
  if (std::abs(rho) >= 1.0) {
    throw DegenerateCorrelationError("derivative of Phi2 undefined at |rho| = 1");
  }
}

// P(X > dh, Y > dk) for standard bivariate normal with correlation r.
double bvnu(double dh, double dk, double r) {
  if (dh == kInf || dk == kInf) return 0.0;
  if (dh == -kInf) return dk == -kInf ? 1.0 : std_cdf(-dk);
  if (dk == -kInf) return std_cdf(-dh);
  if (r == 0.0) return std_cdf(-dh) * std_cdf(-dk);

  const double* w = nullptr;
  const double* x = nullptr;
  int lg = 0;
  const double ar = std::abs(r);
  if (ar < 0.3) {
    w = kGl6W;
    x = kGl6X;
    lg = 3;
  } else if (ar < 0.75) {
    w = kGl12W;
    x = kGl12X;
    lg = 6;
  } else {
    w = kGl20W;
    x = kGl20X;
    lg = 10;
  }

  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;

  if (ar < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r) / 2.0;
    for (int i = 0; i < lg; ++i) {
      for (const double sgn : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sgn * x[i]));
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / kTwoPi + std_cdf(-h) * std_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double as = 1.0 - r * r;
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0) {
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      }
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(kTwoPi) * std_cdf(-b / a);
        bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      a /= 2.0;
      double sum = 0.0;
      for (int i = 0; i < lg; ++i) {
        for (const double sgn : {-1.0, 1.0}) {
          const double xs = (a * (1.0 + sgn * x[i])) * (a * (1.0 + sgn * x[i]));
          asr = -(bs / xs + hk) / 2.0;
          if (asr > -100.0) {
            const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
            const double rs = std::sqrt(1.0 - xs);
            const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
            sum += w[i] * std::exp(asr) * (sp - ep);
          }
        }
      }
      bvn = (a * sum - bvn) / kTwoPi;
    }
    if (r > 0.0) {
      bvn += std_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double L = h < 0.0 ? std_cdf(k) - std_cdf(h) : std_cdf(-h) - std_cdf(-k);
      bvn = L - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double pdf2_finite(double a, double b, double rho) {
  const double s2 = 1.0 - rho * rho;
  const double q = (a * a - 2.0 * rho * a * b + b * b) / s2;
  return std::exp(-0.5 * q) / (kTwoPi * std::sqrt(s2));
}

}  // namespace

double std_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double log_std_cdf(double x) {
  if (x == kInf) return 0.0;
  if (x == -kInf) return -kInf;
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  if (x > -35.0) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  // Asymptotic series of the Mills ratio; truncation error < 1e-13 here.
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z * (1.0 - 9.0 * z))));
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

double inv_mills(double x) {
  if (x == kInf) return 0.0;
  if (x > -35.0) return std_pdf(x) / std_cdf(x);
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z * (1.0 - 9.0 * z))));
  return -x / series;
}

double std_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("std_quantile: probability outside [0, 1]");
  }
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;

  // Acklam's rational approximation (relative error ~1e-9) ...
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  const bool upper = p > 0.5;
  const double pp = upper ? 1.0 - p : p;
  double x = 0.0;
  if (pp < p_low) {
    const double q = std::sqrt(-2.0 * std::log(pp));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = pp - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // ... refined by Halley steps on Phi(x) - p (lower half, so Phi is accurate).
  for (int it = 0; it < 2; ++it) {
    const double e = std_cdf(x) - pp;
    const double u = e * std::sqrt(kTwoPi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return upper ? -x : x;
}

double biv_cdf(const BivArgs& args) {
  check_rho(args.rho);
  if (std::isnan(args.a) || std::isnan(args.b)) {
    throw std::domain_error("biv_cdf: NaN argument");
  }
  return bvnu(-args.a, -args.b, args.rho);
}

double log_biv_cdf(const BivArgs& args) {
  const double p = biv_cdf(args);
  if (p > 1e-280) return std::log(p);

  double a = std::min(args.a, args.b);
  const double b = std::max(args.a, args.b);
  const double rho = args.rho;
  if (a == -kInf) return -kInf;
  if (b == kInf) return log_std_cdf(a);
  if (rho == 1.0) return log_std_cdf(a);
  if (rho == -1.0) return p > 0.0 ? std::log(p) : -kInf;

  // Phi2 = int_{-inf}^{a} phi(x) Phi((b - rho x)/s) dx with x = a - t, summed
  // by composite Gauss-Legendre in the log domain.
  const double s = std::sqrt(1.0 - rho * rho);
  const double length = 50.0 / std::max(1.0, std::abs(a));
  constexpr int kPanels = 40;
  const double half = 0.5 * length / kPanels;
  double log_max = -kInf;
  double terms[kPanels * 20];
  double logw[kPanels * 20];
  int m = 0;
  for (int p_i = 0; p_i < kPanels; ++p_i) {
    const double mid = (2 * p_i + 1) * half;
    for (int i = 0; i < 10; ++i) {
      for (const double sgn : {-1.0, 1.0}) {
        const double t = mid + sgn * half * kGl20X[i];
        const double x = a - t;
        const double h = -0.5 * x * x - kLogSqrt2Pi + log_std_cdf((b - rho * x) / s);
        terms[m] = h;
        logw[m] = std::log(half * kGl20W[i]);
        log_max = std::max(log_max, h + logw[m]);
        ++m;
      }
    }
  }
  if (log_max == -kInf) return -kInf;
  double acc = 0.0;
  for (int i = 0; i < m; ++i) acc += std::exp(terms[i] + logw[i] - log_max);
  return log_max + std::log(acc);
}

double biv_pdf(const BivArgs& args) {
  require_open_rho(args.rho);
  if (std::isinf(args.a) || std::isinf(args.b)) return 0.0;
  return pdf2_finite(args.a, args.b, args.rho);
}

BivGrad biv_cdf_grad(const BivArgs& args) {
  const BivJet jet = biv_cdf_jet(args);
  return {jet.grad[0], jet.grad[1], jet.grad[2]};
}

BivRhoHess biv_cdf_hess_rho(const BivArgs& args) {
  const BivJet jet = biv_cdf_jet(args);
  return {jet.hess[2][0], jet.hess[2][1], jet.hess[2][2]};
}

BivJet biv_cdf_jet(const BivArgs& args) {
  require_open_rho(args.rho);
  const double a = args.a;
  const double b = args.b;
  const double rho = args.rho;
  BivJet jet;
  jet.value = biv_cdf(args);

  if (a == -kInf || b == -kInf) return jet;
  if (a == kInf && b == kInf) return jet;
  if (a == kInf) {
    jet.grad[1] = std_pdf(b);
    jet.hess[1][1] = -b * jet.grad[1];
    return jet;
  }
  if (b == kInf) {
    jet.grad[0] = std_pdf(a);
    jet.hess[0][0] = -a * jet.grad[0];
    return jet;
  }

  const double s2 = 1.0 - rho * rho;
  const double s = std::sqrt(s2);
  const double f = pdf2_finite(a, b, rho);
  const double fa = std_pdf(a) * std_cdf((b - rho * a) / s);
  const double fb = std_pdf(b) * std_cdf((a - rho * b) / s);
  const double quad = a * a - 2.0 * rho * a * b + b * b;

  jet.grad = {fa, fb, f};
  jet.hess[0][0] = -a * fa - rho * f;
  jet.hess[1][1] = -b * fb - rho * f;
  jet.hess[0][1] = jet.hess[1][0] = f;
  jet.hess[0][2] = jet.hess[2][0] = -f * (a - rho * b) / s2;
  jet.hess[1][2] = jet.hess[2][1] = -f * (b - rho * a) / s2;
  jet.hess[2][2] = f * (rho / s2 + (a * b * s2 - rho * quad) / (s2 * s2));
  return jet;
}

}  // namespace cdr
