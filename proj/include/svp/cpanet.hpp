#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "svp/activations.hpp"
#include "svp/matrix.hpp"

namespace svp {

// z -> phi(W z + b) + rho z with phi(t) = max(t, eta t).
struct CpaLayer {
  Matrix W;
  Vector b;
  double eta = 0.0;
  double rho = 0.0;
};

struct CpaNetwork {
  std::vector<CpaLayer> layers;

  // Throws DimensionError on incompatible shapes, a skip on a non-square
  // layer, or a bias of the wrong length.
  void validate() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
};

struct LayerStep {
  Vector z_next;
  Vector pre_activation;  // W z + b
  ActivationMask mask;    // eta where the pre-activation is <= 0
};

LayerStep layer_forward(const CpaLayer& layer, const Vector& z);
Vector forward(const CpaNetwork& net, const Vector& x);

// One bit per neuron of every layer: pre-activation > 0.
std::vector<bool> region_signature(const CpaNetwork& net, const Vector& x);

struct LocalLinearization {
  Vector z;                         // input to the trained layer
  ActivationMask D;                 // mask of the trained layer
  std::vector<ActivationMask> Ds;   // masks of the trailing layers, in order
  Matrix M_rho;                     // product of (D_k W_k + rho_k Id) over trailing layers
  Matrix M0;                        // D_p W_p ... D_1 W_1, the same product with every rho_k = 0
  Vector B;                         // output = M_rho D W z + B
  std::vector<bool> region_signature;
  double reconstruction_residual = 0.0;
};

/// Runs the layers before `trained_index` to get z, freezes every mask at
/// x, and collects the trailing map and offsets. Throws NumericalError when
/// the affine reconstruction misses the forward output by more than 1e-9
/// (relative to max(1, |output|)).
LocalLinearization linearize(const CpaNetwork& net, std::size_t trained_index, const Vector& x);

// Product of (D_k W_k + rho_k Id) over the layers after `trained_index`,
// with the given frozen masks.
Matrix trailing_map(const CpaNetwork& net, std::size_t trained_index,
                    const std::vector<ActivationMask>& masks);

struct QFactor {
  Matrix MD;
  Vector z;
  Vector factored_s;                  // {s_i(MD) |z_j|}, descending
  double kappa_layers = 0.0;          // kappa(MD)
  double kappa_data = 0.0;            // kappa(diag z)
  double kappa_q = 0.0;               // from factored_s
  std::optional<Vector> direct_s;     // SVD of the materialized n^2 x n^2 block matrix
  double direct_max_deviation = 0.0;  // max_i |factored - direct|, 0 when not materialized
  // Least-squares operator of the trained layer, w = column-stacked W:
  // MD W z = (z^T (x) MD) w. Its singular values are |z| s_i(MD).
  Vector exact_operator_s;
  double operator_residual = 0.0;       // max |MD W z - (z^T (x) MD) w| over random W
  double single_column_residual = 0.0;  // | |MD W z|^2 - w^T Q^T Q w | for one-column W
  double trace_residual = 0.0;          // |tr(L^T L) - tr(Q^T Q)|
  double general_w_gap = 0.0;           // same comparison as single_column for dense W
};

inline constexpr std::size_t kDirectQCap = 12;

/// Singular values of diag(z) (x) MD by factorization. For n <= 12 also
/// materializes the block matrix; quadratic-form checks use 10 random W
/// drawn from `seed`.
QFactor build_q(const Matrix& MD, const Vector& z, std::uint64_t seed = 0);

struct DataFactor {
  double kappa_q = 0.0;
  double kappa_layers = 0.0;
  double kappa_data = 0.0;
};

// Throws std::domain_error when MD or z is all zero.
DataFactor data_factor(const Matrix& MD, const Vector& z);

struct BatchQ {
  std::vector<Vector> block_singvals;  // per feature j, descending
  Vector upper_sq;                     // (1/G) sum_g z_g[j]^2 s_1(M_g D_g)^2
  Vector lower_sq;                     // (1/G) sum_g z_g[j]^2 s_n(M_g D_g)^2
  bool bounds_hold = true;
  Vector feature_rms;                  // z-bar[j]
  double kappa_bound = 0.0;            // (C/c) max z-bar / min* z-bar
  double kappa_measured = 0.0;         // over all block singular values
};

/// Per-feature blocks A_j = (1/G) sum_g z_g[j]^2 (M_g D_g)^T (M_g D_g).
/// C and c bound s_1 and s_n of every M_g D_g from above and below; pass
/// nullopt to use the extremes of the batch itself.
BatchQ batch_q(const std::vector<Matrix>& MDs, const std::vector<Vector>& zs,
               std::optional<double> C = std::nullopt, std::optional<double> c = std::nullopt);

struct LossValue {
  double loss = 0.0;       // |y - yhat|^2
  double expansion = 0.0;  // |y|^2 - 2 y.yhat + |yhat|^2
  std::vector<bool> region_signature;
};

LossValue loss_eval(const CpaNetwork& net, std::size_t trained_index, const Vector& x,
                    const Vector& y);

struct ThirdDifference {
  double value = 0.0;  // L(3h) - 3 L(2h) + 3 L(h) - L(0) along the direction
  double scale = 0.0;  // max |L| over the four points
  bool same_region = false;
};

// Loss along W_trained + t * direction at t = 0, h, 2h, 3h.
ThirdDifference loss_third_difference(const CpaNetwork& net, std::size_t trained_index,
                                      const Vector& x, const Vector& y, const Matrix& direction,
                                      double h);

// The skip of strength rho bypasses the trailing stack f_2 o f_1, so the
// trailing map is M(rho) = M0 + rho Id and no mask depends on rho.
struct Fig9Run {
  Vector rho;
  Vector s1_q;
  Vector s_star_q;
  Vector kappa_q;
  std::vector<Vector> q_spectrum;      // full sorted spectrum per grid point
  bool signature_constant = true;      // all masks of the skip network identical across the grid
  double reconstruction_residual = 0.0;  // max over the grid of |output - (M(rho) D W z + B(rho))|
  // Grid points at which some f_2 mask would flip if the skip sat on f_1
  // alone (output f_2(f_1(z) + rho z)). Diagnostic only.
  std::size_t head_mask_flips = 0;
  CpaNetwork net;                      // every layer with rho = 0
  Vector x;
  Vector y;
};

struct Fig9Result {
  std::vector<Fig9Run> runs;
};

inline constexpr double kFig9Eta = 0.1;

// Toy network f_2 o f_1 o f_0 o f_-1 with all weights, biases and the
// input iid N(0,1), every layer without skip.
CpaNetwork fig9_network(std::mt19937_64& rng, Vector& x);

// Output of the toy network with the skip: f_2(f_1(z0)) + rho z0 where z0
// is the output of f_0. `signature` receives every mask bit.
Vector fig9_forward(const CpaNetwork& net, const Vector& x, double rho, std::vector<bool>* signature = nullptr);

// Six statistics of x: x[1], x[2], mean, max, min, |x|_2.
Vector fig9_target(const Vector& x);

/// Spectrum of Q = diag(z) (x) (M0 + rho Id) D for the trained layer f_0
/// across rho_grid.
Fig9Result fig9_experiment(std::uint64_t master_seed, const Vector& rho_grid, std::size_t runs,
                           unsigned threads = 1);

struct RatioProfile {
  double rho = 0.0;
  Vector ratio_mean;  // s_1/s_i averaged over runs, i = 1..n^2
  Vector ratio_std;
};

RatioProfile ratio_profile(const Fig9Result& result, std::size_t grid_index);

// Layer matrices and biases in the matrix text format plus network.json.
void write_network_snapshot(const std::filesystem::path& dir, const CpaNetwork& net);

}  // namespace svp
