#include "hsicx/hsic.hpp"

#include <algorithm>
#include <cmath>

#include "hsicx/error.hpp"
#include "hsicx/parallel.hpp"

namespace hsicx {

Matrix double_center(const Matrix& m) {
  const auto p = m.rows();
  const double inv = 1.0 / static_cast<double>(p);
  Eigen::VectorXd row_mean = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd col_mean = Eigen::VectorXd::Zero(p);
  double grand = 0.0;
  for (Eigen::Index b = 0; b < p; ++b) {
    for (Eigen::Index a = 0; a < p; ++a) {
      row_mean(a) += m(a, b);
      col_mean(b) += m(a, b);
    }
  }
  for (Eigen::Index a = 0; a < p; ++a) grand += row_mean(a);
  row_mean *= inv;
  col_mean *= inv;
  grand *= inv * inv;
  Matrix out(p, p);
  for (Eigen::Index b = 0; b < p; ++b) {
    for (Eigen::Index a = 0; a < p; ++a) out(a, b) = m(a, b) - row_mean(a) - col_mean(b) + grand;
  }
  return out;
}

namespace {

// tr(K * C) = sum_{a,b} K(a,b) C(b,a), summed column by column.
double trace_of_product(const Matrix& k, const Matrix& c) {
  double acc = 0.0;
  for (Eigen::Index b = 0; b < k.cols(); ++b) {
    for (Eigen::Index a = 0; a < k.rows(); ++a) acc += k(a, b) * c(b, a);
  }
  return acc;
}

double normalizer(std::size_t p) {
  const double pm1 = static_cast<double>(p) - 1.0;
  return 1.0 / (pm1 * pm1);
}

void check_outputs(const MaskDesign& design, const Outputs& outputs) {
  if (static_cast<std::size_t>(outputs.rows()) != design.samples()) {
    throw InvalidArgument("got " + std::to_string(outputs.rows()) + " outputs for " +
                          std::to_string(design.samples()) + " masks");
  }
  if (design.samples() < 2) throw InvalidArgument("p >= 2 required");
  if (outputs.cols() == 0) throw InvalidArgument("outputs must have at least one component");
  if (!outputs.allFinite()) throw InvalidArgument("outputs contain NaN or Inf");
}

void check_index(const MaskDesign& design, std::size_t i) {
  if (i >= design.patches()) {
    throw InvalidArgument("patch index " + std::to_string(i) + " out of range for d=" +
                          std::to_string(design.patches()));
  }
}

constexpr Eigen::Index kBlockRows = 64;

}  // namespace

double hsic_estimate(const Matrix& k, const Matrix& l) {
  if (k.rows() != k.cols() || l.rows() != l.cols()) throw InvalidArgument("Gram matrices must be square");
  if (k.rows() != l.rows()) throw InvalidArgument("Gram matrices differ in size");
  if (k.rows() < 2) throw InvalidArgument("p >= 2 required");
  return trace_of_product(k, double_center(l)) * normalizer(static_cast<std::size_t>(k.rows()));
}

OutputGram::OutputGram(Outputs outputs, const RbfKernel& kernel) : outputs_(std::move(outputs)) {
  if (outputs_.rows() < 2) throw InvalidArgument("p >= 2 required");
  if (kernel.bandwidth) {
    if (!(*kernel.bandwidth > 0.0)) throw InvalidArgument("RBF bandwidth must be strictly positive");
    bandwidth_ = kernel.bandwidth;
  } else {
    bandwidth_ = median_bandwidth(outputs_, kernel.rule);
  }
}

Eigen::VectorXd OutputGram::quadratic_forms(const Matrix& v, std::size_t workers) const {
  const auto p = outputs_.rows();
  if (v.rows() != p) throw InvalidArgument("quadratic form vectors must have p rows");
  const auto q = v.cols();
  if (!bandwidth_ || q == 0) return Eigen::VectorXd::Zero(q);
  const double scale = -1.0 / (2.0 * *bandwidth_ * *bandwidth_);
  const auto blocks = static_cast<std::size_t>((p + kBlockRows - 1) / kBlockRows);
  Matrix partial(q, static_cast<Eigen::Index>(blocks));
  parallel_for(blocks, workers, [&](std::size_t blk) {
    const Eigen::Index a0 = static_cast<Eigen::Index>(blk) * kBlockRows;
    const Eigen::Index rows = std::min(kBlockRows, p - a0);
    Matrix lblk(rows, p);
    for (Eigen::Index b = 0; b < p; ++b) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index a = a0 + r;
        lblk(r, b) = a == b ? 1.0 : std::exp(squared_distance(outputs_, a, b) * scale);
      }
    }
    const Matrix w = lblk * v;
    for (Eigen::Index c = 0; c < q; ++c) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < rows; ++r) acc += v(a0 + r, c) * w(r, c);
      partial(c, static_cast<Eigen::Index>(blk)) = acc;
    }
  });
  Eigen::VectorXd out(q);
  for (Eigen::Index c = 0; c < q; ++c) {
    double acc = 0.0;
    for (Eigen::Index b = 0; b < partial.cols(); ++b) acc += partial(c, b);
    out(c) = acc;
  }
  return out;
}

Matrix OutputGram::centered() const {
  const auto p = outputs_.rows();
  if (!bandwidth_) return Matrix::Zero(p, p);
  return double_center(gram_rbf(outputs_, *bandwidth_).entries);
}

namespace {

// Centered +-1 encoding of each patch column: u_i = H (2 m_i - 1).
Matrix centered_signs(const MaskDesign& design) {
  const auto p = static_cast<Eigen::Index>(design.samples());
  const auto d = static_cast<Eigen::Index>(design.patches());
  Matrix u(p, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double sum = 0.0;
    for (Eigen::Index a = 0; a < p; ++a) {
      u(a, i) = design.at(static_cast<std::size_t>(a), static_cast<std::size_t>(i)) ? 1.0 : -1.0;
      sum += u(a, i);
    }
    const double mean = sum / static_cast<double>(p);
    for (Eigen::Index a = 0; a < p; ++a) u(a, i) -= mean;
  }
  return u;
}

nlohmann::json run_digest(const MaskDesign& design, const OutputGram& gram, const RbfKernel& kernel) {
  nlohmann::json cfg = {
      {"sampler", to_string(design.sampler().kind)},
      {"prob", design.sampler().prob},
      {"jitter", design.sampler().jitter},
      {"seed", design.seed()},
      {"samples", design.samples()},
      {"patches", design.patches()},
      {"output_kernel", to_string(kernel)},
  };
  if (gram.bandwidth()) {
    cfg["bandwidth"] = *gram.bandwidth();
  } else {
    cfg["bandwidth"] = nullptr;
  }
  return cfg;
}

}  // namespace

AttributionResult attribute(const MaskDesign& design, const Outputs& outputs, const RbfKernel& kernel,
                            std::size_t workers) {
  check_outputs(design, outputs);
  const OutputGram gram(outputs, kernel);
  AttributionResult result;
  result.grid = Grid{design.patches(), 1};
  result.config = run_digest(design, gram, kernel);
  if (!gram.bandwidth()) {
    result.scores.assign(design.patches(), 0.0);
    result.warnings.emplace_back(kZeroSpreadWarning);
    return result;
  }
  const Eigen::VectorXd q = gram.quadratic_forms(centered_signs(design), workers);
  const double norm = 0.5 * normalizer(design.samples());
  result.scores.resize(design.patches());
  for (std::size_t i = 0; i < design.patches(); ++i) result.scores[i] = q(static_cast<Eigen::Index>(i)) * norm;
  return result;
}

namespace {

std::vector<std::uint8_t> gather_columns(const MaskDesign& design, std::span<const std::size_t> subset) {
  std::vector<std::uint8_t> block;
  block.reserve(design.samples() * subset.size());
  for (std::size_t a = 0; a < design.samples(); ++a) {
    for (auto i : subset) block.push_back(design.at(a, i));
  }
  return block;
}

double subset_against(const MaskDesign& design, std::span<const std::size_t> subset, const Matrix& lc) {
  const auto k = gram_anova_subset(gather_columns(design, subset), subset.size());
  return trace_of_product(k.entries, lc) * normalizer(design.samples());
}

double single_against(const MaskDesign& design, std::size_t i, const Matrix& lc) {
  const auto k = gram_dirac_centered(design.column(i));
  return trace_of_product(k.entries, lc) * normalizer(design.samples());
}

}  // namespace

double hsic_subset(const MaskDesign& design, const Outputs& outputs, std::span<const std::size_t> subset,
                   const RbfKernel& kernel) {
  check_outputs(design, outputs);
  validate(KernelSpec{AnovaSubsetKernel{{subset.begin(), subset.end()}}}, design.patches());
  const OutputGram gram(outputs, kernel);
  if (!gram.bandwidth()) return 0.0;
  return subset_against(design, subset, gram.centered());
}

double interaction(const MaskDesign& design, const Outputs& outputs, std::size_t i, std::size_t j,
                   const RbfKernel& kernel) {
  check_outputs(design, outputs);
  check_index(design, i);
  check_index(design, j);
  if (i == j) throw InvalidArgument("interaction needs two distinct patches");
  const OutputGram gram(outputs, kernel);
  if (!gram.bandwidth()) return 0.0;
  const Matrix lc = gram.centered();
  const std::size_t pair[2] = {i, j};
  return subset_against(design, pair, lc) - single_against(design, i, lc) - single_against(design, j, lc);
}

InteractionMatrix interaction_matrix(const MaskDesign& design, const Outputs& outputs, const RbfKernel& kernel,
                                     const std::vector<std::pair<std::size_t, std::size_t>>* candidates,
                                     std::size_t workers) {
  check_outputs(design, outputs);
  const auto d = design.patches();
  InteractionMatrix result;
  if (candidates) {
    for (auto [i, j] : *candidates) {
      check_index(design, i);
      check_index(design, j);
      if (i == j) throw InvalidArgument("interaction needs two distinct patches");
      result.pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(result.pairs.begin(), result.pairs.end());
    result.pairs.erase(std::unique(result.pairs.begin(), result.pairs.end()), result.pairs.end());
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) result.pairs.emplace_back(i, j);
    }
  }
  const auto dd = static_cast<Eigen::Index>(d);
  result.entries = Matrix::Zero(dd, dd);
  const OutputGram gram(outputs, kernel);
  if (!gram.bandwidth()) {
    result.warnings.emplace_back(kZeroSpreadWarning);
    return result;
  }

  // The pair term of the ANOVA kernel is k0_i * k0_j = t t^T / 4 with
  // t = s_i * s_j; the constant term vanishes under centering.
  const auto p = static_cast<Eigen::Index>(design.samples());
  const double norm = 0.25 * normalizer(design.samples());
  const std::size_t group = std::max<std::size_t>(1, (std::size_t{1} << 24) / design.samples());
  for (std::size_t first = 0; first < result.pairs.size(); first += group) {
    const std::size_t count = std::min(group, result.pairs.size() - first);
    Matrix t(p, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      const auto [i, j] = result.pairs[first + c];
      double sum = 0.0;
      for (Eigen::Index a = 0; a < p; ++a) {
        const auto row = static_cast<std::size_t>(a);
        const double v = design.at(row, i) == design.at(row, j) ? 1.0 : -1.0;
        t(a, static_cast<Eigen::Index>(c)) = v;
        sum += v;
      }
      t.col(static_cast<Eigen::Index>(c)).array() -= sum / static_cast<double>(p);
    }
    const Eigen::VectorXd q = gram.quadratic_forms(t, workers);
    for (std::size_t c = 0; c < count; ++c) {
      const auto [i, j] = result.pairs[first + c];
      const double value = q(static_cast<Eigen::Index>(c)) * norm;
      result.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
      result.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
    }
  }
  return result;
}

std::vector<InteractionPair> top_interactions(const InteractionMatrix& matrix, std::size_t k,
                                              std::optional<double> threshold) {
  std::vector<InteractionPair> out;
  for (auto [i, j] : matrix.pairs) {
    const double v = matrix.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (threshold && !(v > *threshold)) continue;
    out.push_back({i, j, v});
  }
  std::sort(out.begin(), out.end(), [](const InteractionPair& a, const InteractionPair& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  if (k > 0 && out.size() > k) out.resize(k);
  return out;
}

}  // namespace hsicx
