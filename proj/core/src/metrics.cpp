#include "crea/metrics.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace crea {

ConfusionMatrix::ConfusionMatrix(LabelSet labels, bool track_abstention)
    : labels_(std::move(labels)), track_abstention_(track_abstention) {
  counts_.assign(side(), std::vector<long long>(side(), 0));
}

long long ConfusionMatrix::at(std::size_t gold, std::size_t pred) const {
  return counts_.at(gold).at(pred);
}

void ConfusionMatrix::add(std::size_t gold, std::size_t pred, long long count) {
  counts_.at(gold).at(pred) += count;
}

long long ConfusionMatrix::total() const {
  long long sum = 0;
  for (const auto& row : counts_) {
    for (long long c : row) sum += c;
  }
  return sum;
}

long long ConfusionMatrix::abstentions() const {
  if (!track_abstention_) return 0;
  long long sum = 0;
  for (const auto& row : counts_) sum += row[abstention_column()];
  return sum;
}

ConfusionMatrix confusion(const std::vector<std::optional<std::string>>& preds,
                          const std::vector<std::string>& golds,
                          const LabelSet& labels) {
  if (preds.size() != golds.size()) {
    throw ValidationError("confusion: " + std::to_string(preds.size()) +
                          " predictions vs " + std::to_string(golds.size()) +
                          " golds");
  }
  if (preds.empty()) throw ValidationError("confusion: no examples to score");

  const bool any_abstention =
      std::any_of(preds.begin(), preds.end(),
                  [](const auto& p) { return !p.has_value(); });
  ConfusionMatrix cm(labels, any_abstention);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t g = labels.id_of(golds[i]);
    const std::size_t p =
        preds[i] ? labels.id_of(*preds[i]) : cm.abstention_column();
    cm.add(g, p);
  }
  return cm;
}

ClassificationReport classification_report(const ConfusionMatrix& cm) {
  const long long total = cm.total();
  if (total == 0) throw ValidationError("classification_report: empty matrix");

  const std::size_t n = cm.labels().size();
  ClassificationReport report;
  report.total = total;
  report.abstentions = cm.abstentions();

  long long trace = 0;
  long long support_sum = 0;
  for (std::size_t c = 0; c < n; ++c) {
    long long tp = cm.at(c, c);
    long long gold_row = 0;
    long long pred_col = 0;
    for (std::size_t j = 0; j < cm.side(); ++j) gold_row += cm.at(c, j);
    for (std::size_t i = 0; i < cm.side(); ++i) pred_col += cm.at(i, c);

    ClassMetrics m;
    m.label = cm.labels().name_of(c);
    m.support = gold_row;
    m.precision = pred_col == 0 ? 0.0 : static_cast<double>(tp) / pred_col;
    m.recall = gold_row == 0 ? 0.0 : static_cast<double>(tp) / gold_row;
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    trace += tp;
    support_sum += gold_row;
    report.per_class.push_back(std::move(m));
  }

  report.accuracy = static_cast<double>(trace) / total;
  for (const auto& m : report.per_class) {
    report.macro_avg.precision += m.precision / n;
    report.macro_avg.recall += m.recall / n;
    report.macro_avg.f1 += m.f1 / n;
    if (support_sum > 0) {
      const double w = static_cast<double>(m.support) / support_sum;
      report.weighted_avg.precision += w * m.precision;
      report.weighted_avg.recall += w * m.recall;
      report.weighted_avg.f1 += w * m.f1;
    }
  }
  return report;
}

namespace {

double f_measure(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

}  // namespace

double rouge_n(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference, int n) {
  if (n != 1 && n != 2) throw ValidationError("rouge_n: n must be 1 or 2");
  const std::size_t un = static_cast<std::size_t>(n);
  if (candidate.size() < un || reference.size() < un) return 0.0;

  const auto ngram_counts = [un](const std::vector<std::string>& tokens) {
    std::map<std::vector<std::string>, long long> counts;
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
      counts[{tokens.begin() + i, tokens.begin() + i + un}] += 1;
    }
    return counts;
  };

  const auto cand_counts = ngram_counts(candidate);
  const auto ref_counts = ngram_counts(reference);
  long long overlap = 0;
  for (const auto& [gram, count] : ref_counts) {
    auto it = cand_counts.find(gram);
    if (it != cand_counts.end()) overlap += std::min(count, it->second);
  }
  const long long cand_total = static_cast<long long>(candidate.size() - un + 1);
  const long long ref_total = static_cast<long long>(reference.size() - un + 1);
  const double precision = static_cast<double>(overlap) / cand_total;
  const double recall = static_cast<double>(overlap) / ref_total;
  return f_measure(precision, recall);
}

namespace {

// Full LCS table; table[i][j] = LCS length of a[0..i) and b[0..j).
std::vector<std::vector<int>> lcs_table(const std::vector<std::string>& a,
                                        const std::vector<std::string>& b) {
  std::vector<std::vector<int>> table(a.size() + 1,
                                      std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        table[i][j] = table[i - 1][j - 1] + 1;
      } else {
        table[i][j] = std::max(table[i - 1][j], table[i][j - 1]);
      }
    }
  }
  return table;
}

}  // namespace

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const int lcs = lcs_table(candidate, reference)[candidate.size()][reference.size()];
  const double precision = static_cast<double>(lcs) / candidate.size();
  const double recall = static_cast<double>(lcs) / reference.size();
  return f_measure(precision, recall);
}

namespace {

// Indices of ref tokens participating in the LCS of ref x cand.
std::vector<std::size_t> lcs_indices(const std::vector<std::string>& ref,
                                     const std::vector<std::string>& cand) {
  const auto table = lcs_table(ref, cand);
  std::vector<std::size_t> indices;
  std::size_t i = ref.size();
  std::size_t j = cand.size();
  while (i > 0 && j > 0) {
    if (ref[i - 1] == cand[j - 1]) {
      indices.push_back(i - 1);
      --i;
      --j;
    } else if (table[i - 1][j] >= table[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(indices.begin(), indices.end());
  return indices;
}

}  // namespace

double rouge_lsum(const std::string& candidate, const std::string& reference,
                  const text::SentenceSplitter& splitter) {
  const auto split = splitter ? splitter : [](std::string_view s) {
    return text::split_sentences(s);
  };

  std::vector<std::vector<std::string>> ref_sents;
  std::vector<std::vector<std::string>> cand_sents;
  for (const auto& s : split(reference)) ref_sents.push_back(text::tokenize(s));
  for (const auto& s : split(candidate)) cand_sents.push_back(text::tokenize(s));

  long long ref_total = 0;
  long long cand_total = 0;
  std::unordered_map<std::string, long long> ref_budget;
  std::unordered_map<std::string, long long> cand_budget;
  for (const auto& s : ref_sents) {
    ref_total += static_cast<long long>(s.size());
    for (const auto& tok : s) ref_budget[tok] += 1;
  }
  for (const auto& s : cand_sents) {
    cand_total += static_cast<long long>(s.size());
    for (const auto& tok : s) cand_budget[tok] += 1;
  }
  if (ref_total == 0 || cand_total == 0) return 0.0;

  long long hits = 0;
  for (const auto& ref_sent : ref_sents) {
    // Union of LCS hit positions across all candidate sentences.
    std::vector<char> hit(ref_sent.size(), 0);
    for (const auto& cand_sent : cand_sents) {
      for (std::size_t idx : lcs_indices(ref_sent, cand_sent)) hit[idx] = 1;
    }
    for (std::size_t i = 0; i < ref_sent.size(); ++i) {
      if (!hit[i]) continue;
      auto r = ref_budget.find(ref_sent[i]);
      auto c = cand_budget.find(ref_sent[i]);
      if (r != ref_budget.end() && r->second > 0 && c != cand_budget.end() &&
          c->second > 0) {
        ++hits;
        r->second -= 1;
        c->second -= 1;
      }
    }
  }
  const double precision = static_cast<double>(hits) / cand_total;
  const double recall = static_cast<double>(hits) / ref_total;
  return f_measure(precision, recall);
}

RougeScores rouge_all(const std::string& candidate,
                      const std::string& reference) {
  const auto cand_tokens = text::tokenize(candidate);
  const auto ref_tokens = text::tokenize(reference);
  RougeScores scores;
  scores.r1 = rouge_n(cand_tokens, ref_tokens, 1);
  scores.r2 = rouge_n(cand_tokens, ref_tokens, 2);
  scores.rl = rouge_l(cand_tokens, ref_tokens);
  scores.rlsum = rouge_lsum(candidate, reference);
  return scores;
}

NormalizationProfile normalization_profile_from_string(std::string_view name) {
  if (name == "english_squad") return NormalizationProfile::english_squad;
  if (name == "generic") return NormalizationProfile::generic;
  throw ValidationError("unknown normalization profile: " + std::string(name));
}

std::string_view to_string(NormalizationProfile profile) {
  return profile == NormalizationProfile::english_squad ? "english_squad"
                                                        : "generic";
}

std::string qa_normalize(const std::string& answer,
                         NormalizationProfile profile) {
  // Fold case and drop punctuation in one pass.
  std::string folded;
  folded.reserve(answer.size());
  std::size_t i = 0;
  while (i < answer.size()) {
    const std::uint32_t cp = text::fold_case(text::decode_utf8(answer, i));
    if (!text::is_punct(cp)) text::append_utf8(folded, cp);
  }

  auto tokens = text::tokenize(folded);
  if (profile == NormalizationProfile::english_squad) {
    std::erase_if(tokens, [](const std::string& tok) {
      return tok == "a" || tok == "an" || tok == "the";
    });
  }
  return text::join_tokens(tokens);
}

QaExampleScore qa_scores(const std::string& pred,
                         const std::vector<std::string>& golds,
                         NormalizationProfile profile) {
  if (golds.empty()) throw ValidationError("qa_scores: empty gold list");

  const std::string norm_pred = qa_normalize(pred, profile);
  const auto pred_tokens = text::tokenize(norm_pred);

  QaExampleScore score;
  for (const auto& gold : golds) {
    const std::string norm_gold = qa_normalize(gold, profile);
    if (norm_pred == norm_gold) score.em = 1;

    const auto gold_tokens = text::tokenize(norm_gold);
    double f1 = 0.0;
    if (pred_tokens.empty() || gold_tokens.empty()) {
      f1 = (pred_tokens.empty() && gold_tokens.empty()) ? 1.0 : 0.0;
    } else {
      std::unordered_map<std::string, long long> gold_counts;
      for (const auto& tok : gold_tokens) gold_counts[tok] += 1;
      long long overlap = 0;
      for (const auto& tok : pred_tokens) {
        auto it = gold_counts.find(tok);
        if (it != gold_counts.end() && it->second > 0) {
          ++overlap;
          it->second -= 1;
        }
      }
      const double precision =
          static_cast<double>(overlap) / pred_tokens.size();
      const double recall = static_cast<double>(overlap) / gold_tokens.size();
      f1 = f_measure(precision, recall);
    }
    score.f1 = std::max(score.f1, f1);
  }
  return score;
}

std::string lead_n(const std::string& input_text, int n) {
  if (n < 1) throw ValidationError("lead_n: n must be >= 1");
  auto tokens = text::tokenize(input_text);
  if (tokens.size() > static_cast<std::size_t>(n)) tokens.resize(n);
  return text::join_tokens(tokens);
}

}  // namespace crea
