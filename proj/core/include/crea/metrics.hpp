#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crea/corpus.hpp"
#include "crea/text.hpp"

namespace crea {

// Gold-by-predicted counts. When abstentions are tracked the matrix carries
// one extra predicted column (and a structurally empty gold row) so it stays
// square over labels + abstention.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  ConfusionMatrix(LabelSet labels, bool track_abstention);

  const LabelSet& labels() const { return labels_; }
  bool tracks_abstention() const { return track_abstention_; }
  std::size_t side() const { return labels_.size() + (track_abstention_ ? 1 : 0); }
  std::size_t abstention_column() const { return labels_.size(); }

  long long at(std::size_t gold, std::size_t pred) const;
  void add(std::size_t gold, std::size_t pred, long long count = 1);
  long long total() const;
  long long abstentions() const;

 private:
  LabelSet labels_;
  bool track_abstention_ = false;
  std::vector<std::vector<long long>> counts_;
};

// Tallies predictions against golds; nullopt predictions land in the
// abstention column. Throws on length mismatch, empty input, or a gold label
// outside the set.
ConfusionMatrix confusion(const std::vector<std::optional<std::string>>& preds,
                          const std::vector<std::string>& golds,
                          const LabelSet& labels);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  AverageMetrics macro_avg;
  AverageMetrics weighted_avg;
  long long total = 0;
  long long abstentions = 0;
};

// Per-class precision/recall/F1 with zero-denominator cases reported as 0,
// plus accuracy, macro (unweighted over labels) and support-weighted averages.
// Abstention predictions never contribute a true positive anywhere.
ClassificationReport classification_report(const ConfusionMatrix& cm);

struct RougeScores {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
  double rlsum = 0.0;
};

// Clipped n-gram overlap F-measure, n in {1,2}.
double rouge_n(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference, int n);

// LCS F-measure.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference);

// Summary-level LCS: per-reference-sentence union LCS matches against the
// candidate sentences, each token matchable once, combined over total token
// counts. Equals rouge_l when both sides are single sentences.
double rouge_lsum(const std::string& candidate, const std::string& reference,
                  const text::SentenceSplitter& splitter = nullptr);

RougeScores rouge_all(const std::string& candidate, const std::string& reference);

enum class NormalizationProfile { english_squad, generic };

NormalizationProfile normalization_profile_from_string(std::string_view name);
std::string_view to_string(NormalizationProfile profile);

// Case-fold, strip punctuation, collapse whitespace; english_squad also drops
// the articles a/an/the.
std::string qa_normalize(const std::string& answer,
                         NormalizationProfile profile);

struct QaExampleScore {
  int em = 0;     // 0 or 1
  double f1 = 0;  // token-level, in [0,1]
};

// EM against any normalized gold; F1 is the max token-multiset F1 over golds.
QaExampleScore qa_scores(const std::string& pred,
                         const std::vector<std::string>& golds,
                         NormalizationProfile profile);

struct QaScores {
  double em = 0.0;  // fractions in [0,1]
  double f1 = 0.0;
};

// First min(n, token count) whitespace tokens, rejoined with single spaces.
std::string lead_n(const std::string& input_text, int n = 64);

}  // namespace crea
