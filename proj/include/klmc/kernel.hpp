#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "klmc/cholesky.hpp"
#include "klmc/errors.hpp"

namespace klmc {

// The KLMC/KLMC2 updates are driven by the kernels
//   psi_0(t) = e^{-gamma t},   psi_{k+1}(t) = int_0^t psi_k(s) ds,
//   phi_{k+1}(t) = int_0^t e^{-gamma(t-s)} psi_k(s) ds,
// and by the Gram matrices of [psi_0, psi_1] resp. [psi_0, psi_1, phi_2, phi_3]
// over [0, h], scaled by 2*gamma.
//
// With x = gamma*t, every kernel reduces to a function of x over a power of
// gamma:  psi_1 = p1(x)/gamma, psi_2 = q2(x)/gamma^2, phi_2 = p2(x)/gamma^2,
// phi_3 = p3(x)/gamma^3, where
//   p1 = 1 - e^-x,  q2 = x - 1 + e^-x,
//   p2 = 1 - (1+x) e^-x,  p3 = x - 2 + (2+x) e^-x.
// The closed forms cancel catastrophically as x -> 0 (q2 ~ x^2/2 emerges from
// O(x) terms), so below x = 1 each function switches to its exact Taylor
// series, truncated where the tail is under 1e-16 relative.

namespace detail {

// q2: leading power 2
inline constexpr int q2_lead = 2;
inline constexpr double q2_series[] = {5.00000000000000000e-01, -1.66666666666666657e-01, 4.16666666666666644e-02, -8.33333333333333322e-03, 1.38888888888888894e-03, -1.98412698412698413e-04, 2.48015873015873016e-05, -2.75573192239858925e-06, 2.75573192239858883e-07, -2.50521083854417202e-08, 2.08767569878681002e-09, -1.60590438368216133e-10, 1.14707455977297245e-11, -7.64716373181981641e-13, 4.77947733238738525e-14, -2.81145725434552060e-15, 1.56192069685862253e-16, -8.22063524662432950e-18, 4.11031762331216484e-19, -1.95729410633912626e-20, 8.89679139245057408e-22, -3.86817017063068413e-23, 1.61173757109611839e-24, -6.44695028438447359e-26};
// p2: leading power 2
inline constexpr int p2_lead = 2;
inline constexpr double p2_series[] = {5.00000000000000000e-01, -3.33333333333333315e-01, 1.25000000000000000e-01, -3.33333333333333329e-02, 6.94444444444444406e-03, -1.19047619047619058e-03, 1.73611111111111118e-04, -2.20458553791887140e-05, 2.48015873015873016e-06, -2.50521083854417176e-07, 2.29644326866549102e-08, -1.92708526041859370e-09, 1.49119692770486430e-10, -1.07060292245477428e-11, 7.16921599858107782e-13, -4.49833160695283296e-14, 2.65526518465965852e-15, -1.47971434439237934e-16, 7.80960348429311325e-18, -3.91458821267825228e-19, 1.86832619241462027e-20, -8.50997437538750531e-22, 3.70699641352107214e-23, -1.54726806825227357e-24};
// p3: leading power 3
inline constexpr int p3_lead = 3;
inline constexpr double p3_series[] = {1.66666666666666657e-01, -8.33333333333333287e-02, 2.50000000000000014e-02, -5.55555555555555577e-03, 9.92063492063492008e-04, -1.48809523809523823e-04, 1.92901234567901231e-05, -2.20458553791887106e-06, 2.25468975468975469e-07, -2.08767569878681002e-08, 1.76649482205037760e-09, -1.37648947172756701e-10, 9.94131285136576102e-12, -6.69126826534233923e-13, 4.21718588151828129e-14, -2.49907311497379604e-15, 1.39750799192613615e-16, -7.39857172196189701e-18, 3.71885880204433971e-19, -1.77935827849011459e-20, 8.12315735832443655e-22, -3.54582265641146016e-23, 1.48279856540842894e-24};

// Series tables for I_ij(X) = 2 * int_0^X p_i(x) p_j(x) dx, where the index
// set is (p0, p1, p2, p3) = (e^-x, p1, p2, p3) as above.
inline constexpr int cov00_lead = 1;
inline constexpr double cov00_series[] = {2.00000000000000000e+00, -2.00000000000000000e+00, 1.33333333333333326e+00, -6.66666666666666630e-01, 2.66666666666666663e-01, -8.88888888888888923e-02, 2.53968253968253968e-02, -6.34920634920634920e-03, 1.41093474426807770e-03, -2.82186948853615496e-04, 5.13067179733846430e-05, -8.55111966223077384e-06, 1.31555687111242656e-06, -1.87936695873203806e-07, 2.50582261164271744e-08, -3.13227826455339680e-09, 3.68503325241576076e-10, -4.09448139157306744e-11, 4.30998041218217646e-12, -4.30998041218217656e-13, 4.10474324969731131e-14, -3.73158477245210127e-15, 3.24485632387139219e-16, -2.70404693655949349e-17, 2.16323754924759481e-18};
inline constexpr int cov01_lead = 2;
inline constexpr double cov01_series[] = {1.00000000000000000e+00, -1.00000000000000000e+00, 5.83333333333333370e-01, -2.50000000000000000e-01, 8.61111111111111105e-02, -2.50000000000000014e-02, 6.29960317460317477e-03, -1.40542328042328035e-03, 2.81635802469135815e-04, -5.12566137566137543e-05, 8.54694431083320034e-06, -1.31523569023569031e-06, 1.87913754382008344e-07, -2.50566966836808100e-08, 3.13218267500674923e-09, -3.68497702327067420e-10, 4.09445015315913075e-11, -4.30996397091168347e-12, 4.30997219154693007e-13, -4.10473933510909852e-14, 3.73158299309382258e-15, -3.24485555023735824e-16, 2.70404661421197924e-17, -2.16323742030858916e-18};
inline constexpr int cov02_lead = 3;
inline constexpr double cov02_series[] = {3.33333333333333315e-01, -4.16666666666666685e-01, 2.83333333333333326e-01, -1.36111111111111099e-01, 5.11904761904761890e-02, -1.59226190476190466e-02, 4.23831569664902957e-03, -9.88205467372134079e-04, 2.05276976110309447e-04, -3.84842138314360507e-05, 6.57810553643887014e-06, -1.03367476879381652e-06, 1.50350886131309407e-07, -2.03599043091437266e-08, 2.57952889960554129e-09, -3.07086416752119473e-10, 3.44798597387279047e-11, -3.66348417241837501e-12, 3.69426931618640096e-13, -3.54500571176532387e-14, 3.24485640123479559e-15, -2.83924931562221962e-16, 2.37956131706625486e-17};
inline constexpr int cov03_lead = 4;
inline constexpr double cov03_series[] = {8.33333333333333287e-02, -1.00000000000000006e-01, 6.38888888888888840e-02, -2.85714285714285705e-02, 9.97023809523809451e-03, -2.87698412698412717e-03, 7.11529982363315718e-04, -1.54521404521404512e-04, 2.99831983859761622e-05, -5.26672401672401644e-06, 8.46059253797348996e-07, -1.25315601506077692e-07, 1.72291554773366937e-08, -2.21112116391061288e-09, 2.66147225750897448e-10, -3.01701917106851008e-11, 3.23250257247065019e-12, -3.28380321185191695e-13, 3.17185114910832615e-14, -2.92037254820593476e-15, 2.56884539560030447e-16, -2.16323788448900966e-17};
inline constexpr int cov11_lead = 3;
inline constexpr double cov11_series[] = {6.66666666666666630e-01, -5.00000000000000000e-01, 2.33333333333333337e-01, -8.33333333333333287e-02, 2.46031746031746025e-02, -6.25000000000000035e-03, 1.39991181657848321e-03, -2.81084656084656080e-04, 5.12065095398428724e-05, -8.54276895943562685e-06, 1.31491450935895383e-06, -1.87890812890812882e-07, 2.50551672509344457e-08, -3.13208708546010125e-09, 3.68492079412558712e-10, -4.09441891474519341e-11, 4.30994752964119047e-12, -4.30996397091168357e-13, 4.10473542052088572e-14, -3.73158121373554389e-15, 3.24485477660332379e-16, -2.70404629186446499e-17, 2.16323729136958350e-18};
inline constexpr int cov12_lead = 4;
inline constexpr double cov12_series[] = {2.50000000000000000e-01, -2.33333333333333337e-01, 1.25000000000000000e-01, -4.92063492063492050e-02, 1.56250000000000000e-02, -4.19973544973544985e-03, 9.83796296296296198e-04, -2.04826038159371490e-04, 3.84424603174603191e-05, -6.57457254679476917e-06, 1.03339947089947097e-06, -1.50331003505606681e-07, 2.03585660554906581e-08, -2.57944455588791104e-09, 3.07081418605889499e-10, -3.44795802371295238e-11, 3.66346937527493050e-12, -3.69426187846879727e-13, 3.54500215304876650e-14, -3.24485477660332369e-15, 2.83924860645768833e-16, -2.37956102050654166e-17};
inline constexpr int cov13_lead = 5;
inline constexpr double cov13_series[] = {6.66666666666666657e-02, -5.55555555555555525e-02, 2.69841269841269854e-02, -9.72222222222222238e-03, 2.84391534391534393e-03, -7.07671957671957680e-04, 1.54120570787237457e-04, -2.99456202233980024e-05, 5.26351220795665215e-06, -8.45806897394199017e-07, 1.25297248313121333e-07, -1.72279128132302733e-08, 2.21104244310749129e-09, -2.66142539988806867e-10, 3.01699286503572064e-11, -3.23248859739073115e-12, 3.28379616559313367e-13, -3.17184776832759743e-14, 2.92037100093786645e-15, -2.56884471867052452e-16, 2.16323760082319715e-17};
inline constexpr int cov22_lead = 5;
inline constexpr double cov22_series[] = {1.00000000000000006e-01, -1.11111111111111105e-01, 6.74603174603174566e-02, -2.91666666666666671e-02, 9.95370370370370419e-03, -2.83068783068783072e-03, 6.93542568542568501e-04, -1.49728101116990012e-04, 2.89493171437615868e-05, -5.07484138436519347e-06, 8.14432114035288676e-07, -1.20595389692611916e-07, 1.65828183233061846e-08, -2.12914031991045494e-09, 2.56444393528036267e-10, -2.90923973765165791e-11, 3.11960635731347718e-12, -3.17184776832759705e-13, 3.06638955098475980e-14, -2.82572919053757677e-15, 2.48772324094667650e-16};
inline constexpr int cov23_lead = 6;
inline constexpr double cov23_series[] = {2.77777777777777762e-02, -2.77777777777777762e-02, 1.52777777777777773e-02, -6.01851851851851853e-03, 1.88161375661375654e-03, -4.92724867724867702e-04, 1.11699000587889481e-04, -2.24132863021751917e-05, 4.04472254670667349e-06, -6.64358055231071051e-07, 1.00255463598717568e-07, -1.40046333002682208e-08, 1.82213855926010542e-09, -2.21969548376808823e-10, 2.54291935277601161e-11, -2.75019426198416328e-12, 2.81735465266225179e-13, -2.74190747731417766e-14, 2.54180588683030179e-15, -2.24976781969397262e-16};
inline constexpr int cov33_lead = 7;
inline constexpr double cov33_series[] = {7.93650793650793607e-03, -6.94444444444444406e-03, 3.39506172839506171e-03, -1.20370370370370379e-03, 3.42111592111592102e-04, -8.21208112874779593e-05, 1.71844616289060742e-05, -3.20189804316788446e-06, 5.39296339560889785e-07, -8.30447569038838814e-08, 1.17947604233785366e-08, -1.55607036669646891e-09, 1.91804058869484777e-10, -2.21969548376808797e-11, 2.42182795502477287e-12, -2.50017660180378457e-13, 2.44987361101065358e-14, -2.28492289776181458e-15, 2.03344470946424137e-16};

// Crossover between the Taylor branch and the closed-form branch. The series
// is exact to ~1e-21 at x = 1 and the closed form keeps ~1e-13 relative
// accuracy above it, so both branches overlap well around the crossover.
inline constexpr double kSeriesCrossover = 1.0;

template <std::size_t N>
double eval_series(int lead, const double (&c)[N], double x) {
  double acc = 0.0;
  for (std::size_t i = N; i-- > 0;) acc = acc * x + c[i];
  return acc * std::pow(x, lead);
}

inline void check_kernel_args(double t, double gamma) {
  if (!(t >= 0.0)) throw std::invalid_argument("kernel: t must be non-negative");
  if (!(gamma > 0.0)) throw std::invalid_argument("kernel: gamma must be positive");
}

}  // namespace detail

/// psi_k(t) for k in {0, 1, 2}.
inline double psi(int k, double t, double gamma) {
  detail::check_kernel_args(t, gamma);
  const double x = gamma * t;
  switch (k) {
    case 0:
      return std::exp(-x);
    case 1:
      return -std::expm1(-x) / gamma;
    case 2:
      if (x <= detail::kSeriesCrossover)
        return detail::eval_series(detail::q2_lead, detail::q2_series, x) / (gamma * gamma);
      return (x - 1.0 + std::exp(-x)) / (gamma * gamma);
    default:
      throw std::invalid_argument("psi: k must be in {0,1,2}");
  }
}

/// phi_k(t) for k in {2, 3}, the exponentially convolved kernels.
inline double phi(int k, double t, double gamma) {
  detail::check_kernel_args(t, gamma);
  const double x = gamma * t;
  switch (k) {
    case 2:
      if (x <= detail::kSeriesCrossover)
        return detail::eval_series(detail::p2_lead, detail::p2_series, x) / (gamma * gamma);
      return (1.0 - (1.0 + x) * std::exp(-x)) / (gamma * gamma);
    case 3:
      if (x <= detail::kSeriesCrossover)
        return detail::eval_series(detail::p3_lead, detail::p3_series, x) / (gamma * gamma * gamma);
      return (x - 2.0 + (2.0 + x) * std::exp(-x)) / (gamma * gamma * gamma);
    default:
      throw std::invalid_argument("phi: k must be in {2,3}");
  }
}

namespace detail {

// I_ij(X) = 2 int_0^X p_i p_j dx, closed forms. Each pairs with the series
// table of the same name below the crossover.
inline double cov_entry(int i, int j, double X) {
  const double E = std::exp(-X);
  const double E2 = E * E;
  if (i > j) std::swap(i, j);
  const int code = 10 * i + j;
  if (X <= kSeriesCrossover) {
    switch (code) {
      case 00: return eval_series(cov00_lead, cov00_series, X);
      case 01: return eval_series(cov01_lead, cov01_series, X);
      case 02: return eval_series(cov02_lead, cov02_series, X);
      case 03: return eval_series(cov03_lead, cov03_series, X);
      case 11: return eval_series(cov11_lead, cov11_series, X);
      case 12: return eval_series(cov12_lead, cov12_series, X);
      case 13: return eval_series(cov13_lead, cov13_series, X);
      case 22: return eval_series(cov22_lead, cov22_series, X);
      case 23: return eval_series(cov23_lead, cov23_series, X);
      case 33: return eval_series(cov33_lead, cov33_series, X);
    }
  } else {
    switch (code) {
      case 00: return 1.0 - E2;
      case 01: { const double a = 1.0 - E; return a * a; }
      case 02: return 0.5 - 2.0 * E + (X + 1.5) * E2;
      case 03: return 0.5 + (2.0 - 2.0 * X) * E - (X + 2.5) * E2;
      case 11: return 2.0 * X - 3.0 + 4.0 * E - E2;
      case 12: return 2.0 * X - 4.5 + (2.0 * X + 6.0) * E - (X + 1.5) * E2;
      case 13: return X * X - 4.0 * X + 5.5 - 8.0 * E + (X + 2.5) * E2;
      case 22: return 2.0 * X - 5.5 + (4.0 * X + 8.0) * E - (X * X + 3.0 * X + 2.5) * E2;
      case 23: return X * X - 4.0 * X + 4.0 + (2.0 * X * X - 8.0) * E + (X * X + 4.0 * X + 4.0) * E2;
      case 33: return (2.0 / 3.0) * X * X * X - 4.0 * X * X + 8.0 * X - 1.5 +
                      (-4.0 * X * X - 8.0 * X + 8.0) * E - (X * X + 5.0 * X + 6.5) * E2;
    }
  }
  throw std::invalid_argument("cov_entry: bad index");
}

// Dimension of p_k in powers of 1/gamma.
inline constexpr int kGammaPower[4] = {0, 1, 2, 3};

}  // namespace detail

/// Sigma = 2 gamma C, the step-noise covariance of the KLMC update in the
/// (velocity, position) pair per coordinate.
inline Eigen::Matrix2d klmc_noise_cov(double h, double gamma) {
  if (!(h > 0.0)) throw std::invalid_argument("klmc_noise_cov: h must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("klmc_noise_cov: gamma must be positive");
  const double X = gamma * h;
  Eigen::Matrix2d sigma;
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      const double v = detail::cov_entry(i, j, X) /
                       std::pow(gamma, detail::kGammaPower[i] + detail::kGammaPower[j]);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  return sigma;
}

/// Sigma-bar = 2 gamma C-bar, the 4-component step-noise covariance of KLMC2.
/// Its leading 2x2 block is klmc_noise_cov(h, gamma) through the same code
/// path, hence bit-identical.
inline Eigen::Matrix4d klmc2_noise_cov(double h, double gamma) {
  if (!(h > 0.0)) throw std::invalid_argument("klmc2_noise_cov: h must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("klmc2_noise_cov: gamma must be positive");
  const double X = gamma * h;
  Eigen::Matrix4d sigma;
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      const double v = detail::cov_entry(i, j, X) /
                       std::pow(gamma, detail::kGammaPower[i] + detail::kGammaPower[j]);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  return sigma;
}

/// Everything the discrete samplers need for a fixed (gamma, h), immutable
/// after construction and freely shareable across chains.
struct KernelCoefficients {
  double gamma = 0.0;
  double h = 0.0;
  double psi0 = 0.0, psi1 = 0.0, psi2 = 0.0;
  double phi2 = 0.0, phi3 = 0.0;
  Eigen::Matrix2d sigma_klmc;
  Eigen::Matrix4d sigma_klmc2;
  Eigen::Matrix2d chol_klmc;
  Eigen::Matrix4d chol_klmc2;
};

inline KernelCoefficients make_kernel_coefficients(double gamma, double h) {
  KernelCoefficients kc;
  kc.gamma = gamma;
  kc.h = h;
  kc.psi0 = psi(0, h, gamma);
  kc.psi1 = psi(1, h, gamma);
  kc.psi2 = psi(2, h, gamma);
  kc.phi2 = phi(2, h, gamma);
  kc.phi3 = phi(3, h, gamma);
  kc.sigma_klmc = klmc_noise_cov(h, gamma);
  kc.sigma_klmc2 = klmc2_noise_cov(h, gamma);
  kc.chol_klmc = chol_factor(kc.sigma_klmc);
  kc.chol_klmc2 = chol_factor(kc.sigma_klmc2);
  return kc;
}

}  // namespace klmc
