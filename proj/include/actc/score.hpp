#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "actc/common.hpp"

namespace actc {

enum class EditOp { kCorrect, kSubstitution, kDeletion, kInsertion };

inline const char* edit_op_name(EditOp op) {
  switch (op) {
    case EditOp::kCorrect: return "correct";
    case EditOp::kSubstitution: return "sub";
    case EditOp::kDeletion: return "del";
    case EditOp::kInsertion: return "ins";
  }
  return "?";
}

struct AlignedPair {
  EditOp op = EditOp::kCorrect;
  int ref_pos = 0;        // reference tokens consumed before/at this step
  std::string ref_token;  // empty for insertions
  std::string hyp_token;  // empty for deletions
};

struct AlignmentResult {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int correct = 0;
  std::vector<AlignedPair> pairs;

  int errors() const { return substitutions + deletions + insertions; }
};

// Minimum-edit-distance alignment with unit costs. Among minimal alignments
// the backtrace prefers fewer substitutions, then fewer insertions; the DP
// minimizes (errors, substitutions, insertions) lexicographically with a
// fixed preference order (diagonal, deletion, insertion) on exact ties.
inline AlignmentResult align_edit(const std::vector<std::string>& reference,
                                  const std::vector<std::string>& hypothesis) {
  const size_t n = reference.size();
  const size_t m = hypothesis.size();
  using Cost = std::array<int, 3>;  // errors, substitutions, insertions
  std::vector<std::vector<Cost>> dp(n + 1, std::vector<Cost>(m + 1));
  std::vector<std::vector<uint8_t>> from(n + 1, std::vector<uint8_t>(m + 1, 0));
  enum : uint8_t { kDiag = 1, kUp = 2, kLeft = 3 };

  dp[0][0] = {0, 0, 0};
  for (size_t i = 1; i <= n; ++i) {
    dp[i][0] = {static_cast<int>(i), 0, 0};
    from[i][0] = kUp;
  }
  for (size_t j = 1; j <= m; ++j) {
    dp[0][j] = {static_cast<int>(j), 0, static_cast<int>(j)};
    from[0][j] = kLeft;
  }
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const bool match = reference[i - 1] == hypothesis[j - 1];
      Cost diag = dp[i - 1][j - 1];
      if (!match) {
        diag[0] += 1;
        diag[1] += 1;
      }
      Cost up = dp[i - 1][j];  // deletion
      up[0] += 1;
      Cost left = dp[i][j - 1];  // insertion
      left[0] += 1;
      left[2] += 1;

      dp[i][j] = diag;
      from[i][j] = kDiag;
      if (up < dp[i][j]) {
        dp[i][j] = up;
        from[i][j] = kUp;
      }
      if (left < dp[i][j]) {
        dp[i][j] = left;
        from[i][j] = kLeft;
      }
    }
  }

  AlignmentResult res;
  size_t i = n, j = m;
  std::vector<AlignedPair> rev;
  while (i > 0 || j > 0) {
    switch (from[i][j]) {
      case kDiag: {
        AlignedPair p;
        p.ref_pos = static_cast<int>(i - 1);
        p.ref_token = reference[i - 1];
        p.hyp_token = hypothesis[j - 1];
        p.op = p.ref_token == p.hyp_token ? EditOp::kCorrect : EditOp::kSubstitution;
        rev.push_back(std::move(p));
        --i;
        --j;
        break;
      }
      case kUp: {
        AlignedPair p;
        p.op = EditOp::kDeletion;
        p.ref_pos = static_cast<int>(i - 1);
        p.ref_token = reference[i - 1];
        rev.push_back(std::move(p));
        --i;
        break;
      }
      case kLeft: {
        AlignedPair p;
        p.op = EditOp::kInsertion;
        p.ref_pos = static_cast<int>(i);
        p.hyp_token = hypothesis[j - 1];
        rev.push_back(std::move(p));
        --j;
        break;
      }
      default:
        throw std::logic_error("corrupt backtrace");
    }
  }
  res.pairs.assign(rev.rbegin(), rev.rend());
  for (const auto& p : res.pairs) {
    switch (p.op) {
      case EditOp::kCorrect: ++res.correct; break;
      case EditOp::kSubstitution: ++res.substitutions; break;
      case EditOp::kDeletion: ++res.deletions; break;
      case EditOp::kInsertion: ++res.insertions; break;
    }
  }
  return res;
}

struct UttScore {
  std::string utt_id;
  int n_ref = 0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
};

struct CorpusScore {
  double wer = 0.0;
  double sub_rate = 0.0;
  double del_rate = 0.0;
  double ins_rate = 0.0;
  int n_ref_words = 0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  std::vector<UttScore> per_utt;
};

using ScorePair = std::pair<std::vector<std::string>, std::vector<std::string>>;  // ref, hyp

inline CorpusScore corpus_wer(const std::vector<ScorePair>& pairs,
                              const std::vector<std::string>& utt_ids = {}) {
  ACTC_CHECK(!pairs.empty(), "no utterances to score");
  ACTC_CHECK(utt_ids.empty() || utt_ids.size() == pairs.size(),
             "utterance id list does not match pair list");
  CorpusScore score;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const AlignmentResult a = align_edit(pairs[i].first, pairs[i].second);
    UttScore u;
    u.utt_id = utt_ids.empty() ? "utt" + std::to_string(i) : utt_ids[i];
    u.n_ref = static_cast<int>(pairs[i].first.size());
    u.substitutions = a.substitutions;
    u.deletions = a.deletions;
    u.insertions = a.insertions;
    score.n_ref_words += u.n_ref;
    score.substitutions += a.substitutions;
    score.deletions += a.deletions;
    score.insertions += a.insertions;
    score.per_utt.push_back(std::move(u));
  }
  ACTC_CHECK(score.n_ref_words > 0, "reference has no words");
  const double n = score.n_ref_words;
  score.sub_rate = score.substitutions / n;
  score.del_rate = score.deletions / n;
  score.ins_rate = score.insertions / n;
  score.wer = (score.substitutions + score.deletions + score.insertions) / n;
  return score;
}

// The error signature of an alignment: multiset of (op, ref position,
// reference token, hypothesis token). Two hypotheses commit "identical
// errors" when their signatures are equal.
inline std::vector<std::tuple<int, int, std::string, std::string>> error_signature(
    const AlignmentResult& a) {
  std::vector<std::tuple<int, int, std::string, std::string>> sig;
  for (const auto& p : a.pairs)
    if (p.op != EditOp::kCorrect)
      sig.emplace_back(static_cast<int>(p.op), p.ref_pos, p.ref_token, p.hyp_token);
  std::sort(sig.begin(), sig.end());
  return sig;
}

struct SystemComparison {
  double frac_equal_error_count = 0.0;
  double frac_identical_errors = 0.0;
  double frac_a_le_b = 0.0;
  int n_utts = 0;
};

using NamedTranscripts = std::vector<std::pair<std::string, std::vector<std::string>>>;

inline SystemComparison compare_systems(const NamedTranscripts& refs, const NamedTranscripts& hyps_a,
                                        const NamedTranscripts& hyps_b) {
  ACTC_CHECK(!refs.empty(), "no utterances to compare");
  ACTC_CHECK(refs.size() == hyps_a.size() && refs.size() == hyps_b.size(),
             "utterance counts differ between systems");
  std::map<std::string, const std::vector<std::string>*> a_by_id, b_by_id;
  for (const auto& [id, words] : hyps_a) a_by_id[id] = &words;
  for (const auto& [id, words] : hyps_b) b_by_id[id] = &words;
  ACTC_CHECK(a_by_id.size() == refs.size() && b_by_id.size() == refs.size(),
             "duplicate utterance ids");

  SystemComparison cmp;
  cmp.n_utts = static_cast<int>(refs.size());
  int equal_count = 0, identical = 0, a_le_b = 0;
  for (const auto& [id, ref] : refs) {
    const auto ita = a_by_id.find(id);
    const auto itb = b_by_id.find(id);
    ACTC_CHECK(ita != a_by_id.end() && itb != b_by_id.end(), "utterance id missing: " + id);
    const AlignmentResult a = align_edit(ref, *ita->second);
    const AlignmentResult b = align_edit(ref, *itb->second);
    if (a.errors() == b.errors()) ++equal_count;
    if (error_signature(a) == error_signature(b)) ++identical;
    if (a.errors() <= b.errors()) ++a_le_b;
  }
  cmp.frac_equal_error_count = static_cast<double>(equal_count) / cmp.n_utts;
  cmp.frac_identical_errors = static_cast<double>(identical) / cmp.n_utts;
  cmp.frac_a_le_b = static_cast<double>(a_le_b) / cmp.n_utts;
  return cmp;
}

inline void save_score_report(const std::string& path, const CorpusScore& score) {
  nlohmann::json j;
  j["wer"] = score.wer;
  j["sub"] = score.sub_rate;
  j["del"] = score.del_rate;
  j["ins"] = score.ins_rate;
  j["n_ref_words"] = score.n_ref_words;
  nlohmann::json per_utt = nlohmann::json::array();
  for (const auto& u : score.per_utt) {
    const int errors = u.substitutions + u.deletions + u.insertions;
    per_utt.push_back({{"utt", u.utt_id},
                       {"n_ref", u.n_ref},
                       {"sub", u.substitutions},
                       {"del", u.deletions},
                       {"ins", u.insertions},
                       {"wer", u.n_ref > 0 ? static_cast<double>(errors) / u.n_ref : 0.0}});
  }
  j["per_utt"] = std::move(per_utt);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << j.dump(2) << '\n';
}

}  // namespace actc
