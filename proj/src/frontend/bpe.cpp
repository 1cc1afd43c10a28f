#include "v2st/frontend/bpe.hpp"

#include <map>
#include <string>
#include <unordered_map>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

namespace {

std::uint64_t pair_key(int a, int b) { return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b); }

// Replaces every left-to-right non-overlapping occurrence of (a, b) by `id`.
void apply_merge(std::vector<int>& seq, int a, int b, int id) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < seq.size(); ++r) {
    if (r + 1 < seq.size() && seq[r] == a && seq[r + 1] == b) {
      seq[w++] = id;
      ++r;
    } else {
      seq[w++] = seq[r];
    }
  }
  seq.resize(w);
}

std::vector<int> to_bytes(std::string_view s) {
  std::vector<int> out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(c);
  return out;
}

}  // namespace

BpeTokenizer::BpeTokenizer(std::vector<Merge> merges) : merges_(std::move(merges)) { rebuild(); }

void BpeTokenizer::rebuild() {
  token_bytes_.assign(256, std::string());
  for (int b = 0; b < 256; ++b) token_bytes_[static_cast<std::size_t>(b)] = std::string(1, static_cast<char>(b));
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto [a, b] = merges_[i];
    const int limit = 256 + static_cast<int>(i);
    if (a < 0 || b < 0 || a >= limit || b >= limit) {
      throw ValidationError("bpe merge " + std::to_string(i) + " references an undefined id");
    }
    token_bytes_.push_back(token_bytes_[static_cast<std::size_t>(a)] + token_bytes_[static_cast<std::size_t>(b)]);
  }
}

BpeTokenizer BpeTokenizer::train(std::span<const std::string> corpus, int vocab_size) {
  if (corpus.empty()) throw ValidationError("bpe_train: empty corpus");
  if (vocab_size <= 256) throw ValidationError("bpe_train: vocab_size must exceed 256");
  std::vector<std::vector<int>> seqs;
  seqs.reserve(corpus.size());
  for (const auto& s : corpus) seqs.push_back(to_bytes(s));

  std::vector<Merge> merges;
  while (256 + static_cast<int>(merges.size()) < vocab_size) {
    std::map<Merge, int> counts;  // ordered: first max is the smallest pair
    for (const auto& s : seqs)
      for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
    Merge best{-1, -1};
    int best_count = 1;
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    }
    if (best.first < 0) break;
    const int id = 256 + static_cast<int>(merges.size());
    for (auto& s : seqs) apply_merge(s, best.first, best.second, id);
    merges.push_back(best);
  }
  return BpeTokenizer(std::move(merges));
}

TextTokenSeq BpeTokenizer::encode(std::string_view text) const {
  std::unordered_map<std::uint64_t, int> rank;
  rank.reserve(merges_.size());
  for (std::size_t i = 0; i < merges_.size(); ++i) rank.emplace(pair_key(merges_[i].first, merges_[i].second), static_cast<int>(i));

  std::vector<int> seq = to_bytes(text);
  while (seq.size() > 1) {
    int best = -1;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      auto it = rank.find(pair_key(seq[i], seq[i + 1]));
      if (it != rank.end() && (best < 0 || it->second < best)) best = it->second;
    }
    if (best < 0) break;
    const auto& m = merges_[static_cast<std::size_t>(best)];
    apply_merge(seq, m.first, m.second, 256 + best);
  }
  return {std::move(seq), vocab_size()};
}

std::string BpeTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) {
      throw IndexError("bpe_decode: id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab_size()));
    }
    out += token_bytes_[static_cast<std::size_t>(id)];
  }
  return out;
}

nlohmann::json BpeTokenizer::to_json() const {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& [a, b] : merges_) merges.push_back({a, b});
  return {{"kind", "byte_bpe"}, {"merges", merges}};
}

BpeTokenizer BpeTokenizer::from_json(const nlohmann::json& j) {
  std::vector<Merge> merges;
  for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<int>(), m.at(1).get<int>());
  return BpeTokenizer(std::move(merges));
}

}  // namespace v2st::inline V2ST_REAL_NS::frontend
