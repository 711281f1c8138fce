#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cmsq/config.hpp"
#include "cmsq/errors.hpp"

namespace cmsq {

// counts(i, j) = number of examples of true class i predicted as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }

  void add(std::size_t truth, std::size_t pred) {
    if (truth >= classes_ || pred >= classes_) {
      throw UsageError("label pair (" + std::to_string(truth) + ", " + std::to_string(pred) +
                       ") out of range for " + std::to_string(classes_) + " classes");
    }
    ++counts_[truth * classes_ + pred];
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.classes_ != classes_) throw ShapeError("confusion matrices have different class counts");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += o.counts_[k];
    return *this;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += (*this)(truth, j);
    return s;
  }
  std::uint64_t col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes_; ++i) s += (*this)(i, pred);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                 std::size_t classes) {
  if (y_true.size() != y_pred.size()) {
    throw UsageError("y_true has " + std::to_string(y_true.size()) + " labels, y_pred has " +
                     std::to_string(y_pred.size()));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t k = 0; k < y_true.size(); ++k) cm.add(y_true[k], y_pred[k]);
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::string> warnings;  // one per 0/0 cell
};

// Per-class precision, recall and F1 (0/0 taken as 0), averaged with class
// support as weights: weighted_m = sum_c support_c * m_c / total.
// Accuracy is trace / total.
inline EvalReport evaluate(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw UsageError("cannot evaluate an empty confusion matrix");
  EvalReport r;
  const std::size_t C = cm.classes();
  r.per_class.resize(C);
  std::uint64_t trace = 0;
  auto ratio = [&](std::uint64_t num, std::uint64_t den, const char* what, std::size_t c) {
    if (den == 0) {
      r.warnings.push_back(std::string(what) + " of class " + std::to_string(c) + " is 0/0, reported as 0");
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  for (std::size_t c = 0; c < C; ++c) {
    const std::uint64_t tp = cm(c, c);
    const std::uint64_t predicted = cm.col_sum(c);
    const std::uint64_t actual = cm.row_sum(c);
    ClassMetrics& m = r.per_class[c];
    m.support = actual;
    m.precision = ratio(tp, predicted, "precision", c);
    m.recall = ratio(tp, actual, "recall", c);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    trace += tp;
  }
  const auto n = static_cast<double>(total);
  for (const ClassMetrics& m : r.per_class) {
    r.weighted_precision += static_cast<double>(m.support) * m.precision;
    r.weighted_f1 += static_cast<double>(m.support) * m.f1;
  }
  r.weighted_precision /= n;
  r.weighted_f1 /= n;
  // support_c * (tp_c / support_c) = tp_c, so the weighted recall is the
  // trace over the total; summing the integers keeps it bit-equal to accuracy.
  r.weighted_recall = static_cast<double>(trace) / n;
  r.accuracy = static_cast<double>(trace) / n;
  return r;
}

// key=value lines followed by a [confusion] block with one row per true class.
inline std::string format_report(const EvalReport& r, const ConfusionMatrix& cm,
                                 const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "examples=" << cm.total() << "\n";
  out << "accuracy=" << format_double(r.accuracy) << "\n";
  out << "weighted_precision=" << format_double(r.weighted_precision) << "\n";
  out << "weighted_recall=" << format_double(r.weighted_recall) << "\n";
  out << "weighted_f1=" << format_double(r.weighted_f1) << "\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& name = c < class_names.size() ? class_names[c] : std::to_string(c);
    const auto& m = r.per_class[c];
    out << "class." << name << ".precision=" << format_double(m.precision) << "\n";
    out << "class." << name << ".recall=" << format_double(m.recall) << "\n";
    out << "class." << name << ".f1=" << format_double(m.f1) << "\n";
    out << "class." << name << ".support=" << m.support << "\n";
  }
  for (const auto& w : r.warnings) out << "warning=" << w << "\n";
  out << "[confusion]\n";
  out << "true\\pred";
  for (std::size_t j = 0; j < cm.classes(); ++j)
    out << "\t" << (j < class_names.size() ? class_names[j] : std::to_string(j));
  out << "\n";
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    out << (i < class_names.size() ? class_names[i] : std::to_string(i));
    for (std::size_t j = 0; j < cm.classes(); ++j) out << "\t" << cm(i, j);
    out << "\n";
  }
  return out.str();
}

}  // namespace cmsq
