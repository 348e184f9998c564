#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vtreid/numerics.hpp"

namespace vtreid {

struct GalleryItem {
  std::string id;
  int identity = 0;
  int camera = 0;
  Vec64 embedding;  // unit norm
};

struct RankedEntry {
  std::string id;
  double score = 0.0;
};

struct RankingResult {
  std::string query_id;
  std::vector<RankedEntry> entries;  // descending score, ties by ascending id
};

struct RankProtocol {
  // Drop gallery entries that share both identity and camera with the query.
  bool filter_same_camera = true;
};

/// l2_normalize(concat(w * visual, (1 - w) * text)).
Vec64 fuse(std::span<const double> visual, std::span<const double> text, double weight);

/// Ranks the gallery by dot product with the query. Entries with the query's
/// id are always excluded. Throws EmptyGalleryAfterFilter.
RankingResult rank(const GalleryItem& query, std::span<const GalleryItem> gallery,
                   const RankProtocol& protocol);

/// Mean of precision-at-hit over the relevant ids found in the ranking.
/// Throws NoRelevant when none of `relevant` appears in the ranking.
double average_precision(const RankingResult& result, const std::set<std::string>& relevant);

struct Metrics {
  double mAP = 0.0;
  std::vector<std::size_t> ranks;
  std::vector<double> cmc;  // cmc[i] is CMC at ranks[i]

  double cmc_at(std::size_t r) const;
};

/// mAP and CMC over all queries. The relevant set of a query is every
/// surviving gallery item with the query's identity.
Metrics evaluate(std::span<const GalleryItem> queries, std::span<const GalleryItem> gallery,
                 const RankProtocol& protocol, std::span<const std::size_t> ranks);

Metrics evaluate(std::span<const GalleryItem> queries, std::span<const GalleryItem> gallery,
                 const RankProtocol& protocol);

/// "query_id: id1(score) id2(score) ..." limited to the first `top` entries.
std::string format_ranking(const RankingResult& result, std::size_t top);

}  // namespace vtreid
