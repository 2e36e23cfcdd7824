#include "svp/cpanet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "svp/errors.hpp"
#include "svp/linalg.hpp"
#include "svp/matrix_io.hpp"
#include "svp/parallel.hpp"
#include "svp/rng.hpp"
#include "svp/stats.hpp"

namespace svp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// kappa, or NaN for an all-zero spectrum.
double kappa_or_nan(const Vector& s, double zero_tol) {
  if (s.empty() || !(s.front() > 0.0)) return kNaN;
  return condition_number_from_values(s, zero_tol);
}

Vector abs_sorted(const Vector& z) {
  Vector a(z.size());
  std::transform(z.begin(), z.end(), a.begin(), [](double v) { return std::abs(v); });
  std::sort(a.begin(), a.end(), std::greater<>());
  return a;
}

// D W + rho Id for a layer with frozen mask.
Matrix local_map(const CpaLayer& layer, const ActivationMask& mask) {
  Matrix a = apply_mask(mask, layer.W, Side::left);
  if (layer.rho != 0.0) a = shift_identity(std::move(a), layer.rho);
  return a;
}

Vector axpy(const Vector& a, const Vector& b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector masked(const ActivationMask& d, const Vector& v) {
  Vector out = v;
  for (std::size_t i : d.indices()) out[i] *= d.eta();
  return out;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

Vector gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

void CpaNetwork::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const CpaLayer& l = layers[k];
    const std::string where = "layer " + std::to_string(k);
    if (l.W.empty()) throw DimensionError(where + ": empty weight matrix");
    if (l.b.size() != l.W.rows()) throw DimensionError(where + ": bias length != output dimension");
    if (l.rho != 0.0 && !l.W.is_square()) throw DimensionError(where + ": skip needs a square layer");
    if (!valid_eta(l.eta)) throw std::invalid_argument(where + ": slope must be -1 or in [0,1)");
    if (k > 0 && layers[k - 1].W.rows() != l.W.cols())
      throw DimensionError(where + ": input dimension does not match previous output");
  }
}

std::size_t CpaNetwork::input_dim() const { return layers.empty() ? 0 : layers.front().W.cols(); }
std::size_t CpaNetwork::output_dim() const { return layers.empty() ? 0 : layers.back().W.rows(); }

LayerStep layer_forward(const CpaLayer& layer, const Vector& z) {
  if (z.size() != layer.W.cols()) throw DimensionError("layer_forward: input length mismatch");
  if (layer.b.size() != layer.W.rows()) throw DimensionError("layer_forward: bias length mismatch");
  if (layer.rho != 0.0 && !layer.W.is_square())
    throw DimensionError("layer_forward: skip needs a square layer");
  Vector pre = layer.W * z;
  std::vector<std::size_t> off;
  Vector next(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    pre[i] += layer.b[i];
    next[i] = std::max(pre[i], layer.eta * pre[i]);
    if (!(pre[i] > 0.0)) off.push_back(i);
    if (layer.rho != 0.0) next[i] += layer.rho * z[i];
  }
  return {std::move(next), std::move(pre), ActivationMask(layer.W.rows(), layer.eta, std::move(off))};
}

Vector forward(const CpaNetwork& net, const Vector& x) {
  Vector z = x;
  for (const auto& layer : net.layers) z = layer_forward(layer, z).z_next;
  return z;
}

std::vector<bool> region_signature(const CpaNetwork& net, const Vector& x) {
  std::vector<bool> bits;
  Vector z = x;
  for (const auto& layer : net.layers) {
    LayerStep s = layer_forward(layer, z);
    for (double p : s.pre_activation) bits.push_back(p > 0.0);
    z = std::move(s.z_next);
  }
  return bits;
}

Matrix trailing_map(const CpaNetwork& net, std::size_t trained_index,
                    const std::vector<ActivationMask>& masks) {
  if (trained_index >= net.layers.size()) throw std::out_of_range("trained layer index");
  const std::size_t trailing = net.layers.size() - trained_index - 1;
  if (masks.size() != trailing) throw std::invalid_argument("trailing_map: one mask per trailing layer");
  Matrix m = Matrix::identity(net.layers[trained_index].W.rows());
  for (std::size_t k = 0; k < trailing; ++k) m = local_map(net.layers[trained_index + 1 + k], masks[k]) * m;
  return m;
}

LocalLinearization linearize(const CpaNetwork& net, std::size_t trained_index, const Vector& x) {
  net.validate();
  if (trained_index >= net.layers.size()) throw std::out_of_range("trained layer index");
  if (x.size() != net.input_dim()) throw DimensionError("linearize: input length mismatch");

  std::vector<bool> bits;
  Vector z = x;
  for (std::size_t k = 0; k < trained_index; ++k) {
    LayerStep s = layer_forward(net.layers[k], z);
    for (double p : s.pre_activation) bits.push_back(p > 0.0);
    z = std::move(s.z_next);
  }
  const CpaLayer& trained = net.layers[trained_index];
  LayerStep ts = layer_forward(trained, z);
  for (double p : ts.pre_activation) bits.push_back(p > 0.0);

  const Vector dwz = masked(ts.mask, trained.W * z);
  Vector offset = masked(ts.mask, trained.b);
  if (trained.rho != 0.0)
    for (std::size_t i = 0; i < offset.size(); ++i) offset[i] += trained.rho * z[i];

  LocalLinearization out{z, ts.mask, {}, Matrix::identity(trained.W.rows()),
                         Matrix::identity(trained.W.rows()), offset, {}, 0.0};
  Vector cur = ts.z_next;
  for (std::size_t k = trained_index + 1; k < net.layers.size(); ++k) {
    const CpaLayer& layer = net.layers[k];
    LayerStep s = layer_forward(layer, cur);
    for (double p : s.pre_activation) bits.push_back(p > 0.0);
    const Matrix a = local_map(layer, s.mask);
    out.M_rho = a * out.M_rho;
    out.M0 = apply_mask(s.mask, layer.W, Side::left) * out.M0;
    out.B = axpy(a * out.B, masked(s.mask, layer.b));
    out.Ds.push_back(std::move(s.mask));
    cur = std::move(s.z_next);
  }
  out.region_signature = std::move(bits);

  const Vector recon = axpy(out.M_rho * dwz, out.B);
  double res = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) res = std::max(res, std::abs(recon[i] - cur[i]));
  out.reconstruction_residual = res;
  if (res > 1e-9 * std::max(1.0, max_abs(cur)))
    throw NumericalError("linearize: affine reconstruction residual " + format_double(res));
  return out;
}

QFactor build_q(const Matrix& MD, const Vector& z, std::uint64_t seed) {
  if (!MD.is_square()) throw DimensionError("build_q: MD must be square");
  const std::size_t n = MD.rows();
  if (z.size() != n) throw DimensionError("build_q: z length must match MD");

  QFactor q;
  q.MD = MD;
  q.z = z;
  const Vector s = singular_values(MD);
  q.factored_s.reserve(n * n);
  for (double zj : z)
    for (double si : s) q.factored_s.push_back(si * std::abs(zj));
  std::sort(q.factored_s.begin(), q.factored_s.end(), std::greater<>());

  q.kappa_layers = kappa_or_nan(s, default_zero_tol(n));
  q.kappa_data = kappa_or_nan(abs_sorted(z), default_zero_tol(n));
  q.kappa_q = kappa_or_nan(q.factored_s, default_zero_tol(n * n));

  const double znorm = norm2(z);
  q.exact_operator_s.resize(n);
  for (std::size_t i = 0; i < n; ++i) q.exact_operator_s[i] = znorm * s[i];

  if (n <= kDirectQCap) {
    Matrix block(n * n, n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) block(j * n + r, j * n + c) = z[j] * MD(r, c);
    q.direct_s = singular_values(block);
    for (std::size_t i = 0; i < q.factored_s.size(); ++i)
      q.direct_max_deviation = std::max(q.direct_max_deviation, std::abs((*q.direct_s)[i] - q.factored_s[i]));
  }

  // L = z^T (x) MD acting on column-stacked w, materialized n x n^2.
  Matrix L(n, n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) L(r, j * n + c) = z[j] * MD(r, c);
  double q_trace = 0.0;
  for (double v : q.factored_s) q_trace += v * v;
  const double l_norm = frobenius_norm(L);
  q.trace_residual = rel_diff(l_norm * l_norm, q_trace);

  auto rng = trial_engine(seed, 0, 0x51);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  auto qnorm_sq = [&](const Matrix& w) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const Vector col = MD * std::span<const double>(w.column(j));
      acc += z[j] * z[j] * dot(col, col);
    }
    return acc;
  };
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix w = gaussian_matrix(n, n, rng);
    const Vector direct = MD * std::span<const double>(w * z);
    Vector flat(n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) flat[j * n + i] = w(i, j);
    const Vector via_l = L * flat;
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(direct[i] - via_l[i]));
    q.operator_residual = std::max(q.operator_residual, diff / std::max(1.0, max_abs(direct)));
    q.general_w_gap = std::max(q.general_w_gap, rel_diff(dot(direct, direct), qnorm_sq(w)));

    Matrix single(n, n);
    const std::size_t j0 = pick(rng);
    for (std::size_t i = 0; i < n; ++i) single(i, j0) = w(i, j0);
    const Vector ds = MD * std::span<const double>(single * z);
    q.single_column_residual = std::max(q.single_column_residual, rel_diff(dot(ds, ds), qnorm_sq(single)));
  }
  return q;
}

DataFactor data_factor(const Matrix& MD, const Vector& z) {
  if (!MD.is_square() || z.size() != MD.rows()) throw DimensionError("data_factor: shape mismatch");
  DataFactor f;
  f.kappa_layers = condition_number(MD);
  f.kappa_data = condition_number_from_values(abs_sorted(z), default_zero_tol(z.size()));
  f.kappa_q = f.kappa_layers * f.kappa_data;
  return f;
}

BatchQ batch_q(const std::vector<Matrix>& MDs, const std::vector<Vector>& zs,
               std::optional<double> C, std::optional<double> c) {
  if (MDs.empty() || MDs.size() != zs.size()) throw std::invalid_argument("batch_q: need G >= 1 matched pairs");
  const std::size_t n = MDs.front().rows();
  const double G = static_cast<double>(MDs.size());
  std::vector<Matrix> grams;
  Vector s1(MDs.size()), sn(MDs.size());
  for (std::size_t g = 0; g < MDs.size(); ++g) {
    if (MDs[g].rows() != n || MDs[g].cols() != n || zs[g].size() != n)
      throw DimensionError("batch_q: every MD must be n x n with z of length n");
    grams.push_back(MDs[g].transpose() * MDs[g]);
    const Vector s = singular_values(MDs[g]);
    s1[g] = s.front();
    sn[g] = s.back();
  }

  BatchQ out;
  out.block_singvals.resize(n);
  out.upper_sq.assign(n, 0.0);
  out.lower_sq.assign(n, 0.0);
  out.feature_rms.assign(n, 0.0);
  Vector pooled;
  for (std::size_t j = 0; j < n; ++j) {
    Matrix a(n, n);
    for (std::size_t g = 0; g < MDs.size(); ++g) {
      const double w = zs[g][j] * zs[g][j] / G;
      Matrix term = grams[g];
      term *= w;
      a += term;
      out.upper_sq[j] += w * s1[g] * s1[g];
      out.lower_sq[j] += w * sn[g] * sn[g];
      out.feature_rms[j] += w;
    }
    out.feature_rms[j] = std::sqrt(out.feature_rms[j]);
    Vector ev = sym_eigenvalues(a);
    for (double& v : ev) v = std::sqrt(std::max(0.0, v));
    const double slack = 1e-10 * std::max(1.0, out.upper_sq[j]);
    for (double v : ev)
      if (v * v > out.upper_sq[j] + slack || v * v < out.lower_sq[j] - slack) out.bounds_hold = false;
    pooled.insert(pooled.end(), ev.begin(), ev.end());
    out.block_singvals[j] = std::move(ev);
  }
  std::sort(pooled.begin(), pooled.end(), std::greater<>());
  out.kappa_measured = kappa_or_nan(pooled, default_zero_tol(n * n));

  const double upper = C.value_or(*std::max_element(s1.begin(), s1.end()));
  const double lower = c.value_or(*std::min_element(sn.begin(), sn.end()));
  const Vector rms = abs_sorted(out.feature_rms);
  if (lower > 0.0 && rms.front() > 0.0)
    out.kappa_bound = upper / lower * condition_number_from_values(rms, default_zero_tol(n));
  else
    out.kappa_bound = std::numeric_limits<double>::infinity();
  return out;
}

LossValue loss_eval(const CpaNetwork& net, std::size_t trained_index, const Vector& x,
                    const Vector& y) {
  net.validate();
  if (trained_index >= net.layers.size()) throw std::out_of_range("trained layer index");
  if (y.size() != net.output_dim()) throw DimensionError("loss_eval: target length mismatch");
  const Vector yhat = forward(net, x);
  LossValue v;
  for (std::size_t i = 0; i < y.size(); ++i) v.loss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  v.expansion = dot(y, y) - 2.0 * dot(y, yhat) + dot(yhat, yhat);
  v.region_signature = region_signature(net, x);
  return v;
}

ThirdDifference loss_third_difference(const CpaNetwork& net, std::size_t trained_index,
                                      const Vector& x, const Vector& y, const Matrix& direction,
                                      double h) {
  if (trained_index >= net.layers.size()) throw std::out_of_range("trained layer index");
  const Matrix& w0 = net.layers[trained_index].W;
  if (direction.rows() != w0.rows() || direction.cols() != w0.cols())
    throw DimensionError("loss_third_difference: direction shape must match the trained weights");
  double l[4];
  std::vector<bool> sig0;
  ThirdDifference out;
  out.same_region = true;
  for (int k = 0; k < 4; ++k) {
    CpaNetwork moved = net;
    moved.layers[trained_index].W = w0 + (static_cast<double>(k) * h) * direction;
    const LossValue v = loss_eval(moved, trained_index, x, y);
    l[k] = v.loss;
    if (k == 0) sig0 = v.region_signature;
    else if (v.region_signature != sig0) out.same_region = false;
    out.scale = std::max(out.scale, std::abs(v.loss));
  }
  out.value = l[3] - 3.0 * l[2] + 3.0 * l[1] - l[0];
  return out;
}

CpaNetwork fig9_network(std::mt19937_64& rng, Vector& x) {
  x = gaussian_vector(2, rng);
  CpaNetwork net;
  const std::size_t width = 6;
  const std::size_t inputs[] = {2, width, width, width};
  for (std::size_t k = 0; k < 4; ++k) {
    CpaLayer layer;
    layer.W = gaussian_matrix(width, inputs[k], rng);
    layer.b = gaussian_vector(width, rng);
    layer.eta = kFig9Eta;
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

Vector fig9_forward(const CpaNetwork& net, const Vector& x, double rho, std::vector<bool>* signature) {
  constexpr std::size_t trained = 1;
  if (net.layers.size() != 4) throw DimensionError("fig9_forward: expected four layers");
  Vector z = x, skip;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    LayerStep s = layer_forward(net.layers[k], z);
    if (signature)
      for (double p : s.pre_activation) signature->push_back(p > 0.0);
    z = std::move(s.z_next);
    if (k == trained) skip = z;
  }
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += rho * skip[i];
  return z;
}

Vector fig9_target(const Vector& x) {
  if (x.empty()) throw std::invalid_argument("fig9_target: empty input");
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  const double avg = mean(x);
  return {x[0], x.size() > 1 ? x[1] : x[0], avg, *mx, *mn, norm2(x)};
}

Fig9Result fig9_experiment(std::uint64_t master_seed, const Vector& rho_grid, std::size_t runs,
                           unsigned threads) {
  if (rho_grid.empty()) throw std::invalid_argument("fig9_experiment: empty rho grid");
  constexpr std::size_t trained = 1;  // f_0
  constexpr std::size_t head = 3;     // f_2
  Fig9Result result;
  result.runs.resize(runs);
  parallel_for(runs, threads, [&](std::size_t r) {
    auto rng = trial_engine(master_seed, r);
    Fig9Run run;
    run.net = fig9_network(rng, run.x);
    run.y = fig9_target(run.x);
    const LocalLinearization lin = linearize(run.net, trained, run.x);
    const CpaLayer& f0 = run.net.layers[trained];
    const Vector dwz = masked(lin.D, f0.W * lin.z);
    const Vector db = masked(lin.D, f0.b);
    // f_1 output at the frozen point, for the alternative skip placement.
    const Vector z0 = layer_forward(f0, lin.z).z_next;
    const Vector y1 = layer_forward(run.net.layers[trained + 1], z0).z_next;
    run.rho = rho_grid;
    for (std::size_t k = 0; k < rho_grid.size(); ++k) {
      const double rho = rho_grid[k];
      const Matrix m = shift_identity(lin.M0, rho);
      const QFactor q = build_q(apply_mask(lin.D, m, Side::right), lin.z, trial_seed(master_seed, r, k + 1));
      const std::size_t nq = q.factored_s.size();
      run.s1_q.push_back(q.factored_s.front());
      run.s_star_q.push_back(smallest_nonzero(q.factored_s, default_zero_tol(nq)));
      run.kappa_q.push_back(q.kappa_q);
      run.q_spectrum.push_back(q.factored_s);

      std::vector<bool> sig;
      const Vector out = fig9_forward(run.net, run.x, rho, &sig);
      if (sig != lin.region_signature) run.signature_constant = false;
      // B(rho) = B0 + rho D b_0 since the skip carries D W z + D b.
      Vector recon = m * std::span<const double>(dwz);
      for (std::size_t i = 0; i < recon.size(); ++i) recon[i] += lin.B[i] + rho * db[i];
      double res = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) res = std::max(res, std::abs(out[i] - recon[i]));
      run.reconstruction_residual = std::max(run.reconstruction_residual, res);
      if (res > 1e-9 * std::max(1.0, max_abs(out)))
        throw NumericalError("fig9: affine reconstruction residual " + format_double(res));

      Vector shifted = y1;
      for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += rho * z0[i];
      const ActivationMask alt = layer_forward(run.net.layers[head], shifted).mask;
      if (alt.indices() != lin.Ds.back().indices()) ++run.head_mask_flips;
    }
    result.runs[r] = std::move(run);
  });
  return result;
}

RatioProfile ratio_profile(const Fig9Result& result, std::size_t grid_index) {
  if (result.runs.empty()) throw std::invalid_argument("ratio_profile: no runs");
  RatioProfile p;
  p.rho = result.runs.front().rho.at(grid_index);
  const std::size_t len = result.runs.front().q_spectrum.at(grid_index).size();
  p.ratio_mean.assign(len, 0.0);
  p.ratio_std.assign(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    Vector ratios;
    for (const auto& run : result.runs) {
      const Vector& s = run.q_spectrum.at(grid_index);
      ratios.push_back(s[i] > 0.0 ? s.front() / s[i] : kNaN);
    }
    p.ratio_mean[i] = mean(ratios);
    p.ratio_std[i] = stddev(ratios);
  }
  return p;
}

void write_network_snapshot(const std::filesystem::path& dir, const CpaNetwork& net) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["layers"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const CpaLayer& l = net.layers[k];
    const std::string w_name = "layer" + std::to_string(k) + "_W.txt";
    const std::string b_name = "layer" + std::to_string(k) + "_b.txt";
    write_matrix_file(dir / w_name, l.W);
    write_matrix_file(dir / b_name, Matrix(l.b.size(), 1, l.b));
    manifest["layers"].push_back({{"index", k},
                                  {"rows", l.W.rows()},
                                  {"cols", l.W.cols()},
                                  {"eta", l.eta},
                                  {"rho", l.rho},
                                  {"W", w_name},
                                  {"b", b_name}});
  }
  std::ofstream out(dir / "network.json", std::ios::binary);
  if (!out) throw FormatError("cannot write " + (dir / "network.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace svp
