#include "vtreid/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vtreid/error.hpp"
#include "vtreid/visual_contrast.hpp"

namespace vtreid {

Vec64 fuse(std::span<const double> visual, std::span<const double> text, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw Error(Errc::InvalidConfig, "fusion weight must lie in [0, 1]");
  }
  if (!is_unit(visual, kUnitTolerance) || !is_unit(text, kUnitTolerance)) {
    throw Error(Errc::NotNormalized, "fusion inputs must be unit norm");
  }
  Vec64 joined;
  joined.reserve(visual.size() + text.size());
  for (double v : visual) joined.push_back(weight * v);
  for (double t : text) joined.push_back((1.0 - weight) * t);
  return l2_normalize(joined);
}

RankingResult rank(const GalleryItem& query, std::span<const GalleryItem> gallery,
                   const RankProtocol& protocol) {
  RankingResult out{query.id, {}};
  out.entries.reserve(gallery.size());
  for (const auto& g : gallery) {
    if (g.id == query.id) continue;
    if (protocol.filter_same_camera && g.identity == query.identity && g.camera == query.camera) {
      continue;
    }
    out.entries.push_back({g.id, dot(query.embedding, g.embedding)});
  }
  if (out.entries.empty()) {
    throw Error(Errc::EmptyGalleryAfterFilter, "no gallery entries left for query " + query.id);
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

double average_precision(const RankingResult& result, const std::set<std::string>& relevant) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    if (relevant.contains(result.entries[i].id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits == 0) throw Error(Errc::NoRelevant, "query " + result.query_id + " has no match");
  return sum / static_cast<double>(hits);
}

double Metrics::cmc_at(std::size_t r) const {
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] == r) return cmc[i];
  }
  throw Error(Errc::InvalidConfig, "rank " + std::to_string(r) + " was not evaluated");
}

Metrics evaluate(std::span<const GalleryItem> queries, std::span<const GalleryItem> gallery,
                 const RankProtocol& protocol, std::span<const std::size_t> ranks) {
  if (queries.empty()) throw Error(Errc::EmptyInput, "no queries");
  Metrics m;
  m.ranks.assign(ranks.begin(), ranks.end());
  std::vector<std::size_t> first_hit_counts(ranks.size(), 0);
  double ap_sum = 0.0;
  for (const auto& q : queries) {
    const RankingResult r = rank(q, gallery, protocol);
    std::set<std::string> relevant;
    std::size_t first_hit = 0;
    for (const auto& g : gallery) {
      if (g.identity == q.identity && g.id != q.id &&
          !(protocol.filter_same_camera && g.camera == q.camera)) {
        relevant.insert(g.id);
      }
    }
    ap_sum += average_precision(r, relevant);
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      if (relevant.contains(r.entries[i].id)) {
        first_hit = i + 1;
        break;
      }
    }
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (first_hit <= ranks[i]) ++first_hit_counts[i];
    }
  }
  const double nq = static_cast<double>(queries.size());
  m.mAP = ap_sum / nq;
  for (std::size_t c : first_hit_counts) m.cmc.push_back(static_cast<double>(c) / nq);
  return m;
}

Metrics evaluate(std::span<const GalleryItem> queries, std::span<const GalleryItem> gallery,
                 const RankProtocol& protocol) {
  static constexpr std::size_t kDefaultRanks[] = {1, 5, 10};
  return evaluate(queries, gallery, protocol, kDefaultRanks);
}

std::string format_ranking(const RankingResult& result, std::size_t top) {
  std::string line = result.query_id + ":";
  char buf[64];
  for (std::size_t i = 0; i < std::min(top, result.entries.size()); ++i) {
    std::snprintf(buf, sizeof buf, "(%.4f)", result.entries[i].score);
    line += " " + result.entries[i].id + buf;
  }
  return line;
}

}  // namespace vtreid
