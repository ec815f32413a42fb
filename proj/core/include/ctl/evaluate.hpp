#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctl/model.hpp"
#include "ctl/synth.hpp"

namespace ctl {

using Embeddings = std::vector<std::vector<double>>;

// Row-major [queries x gallery] scores; higher means more similar. Euclidean
// similarity is the negated distance.
std::vector<double> similarity_matrix(const Embeddings& queries, const Embeddings& gallery, Similarity metric);

struct RetrievalResult {
  std::vector<double> cmc;  // cmc[r] = fraction of queries matched within the top r + 1
  double map = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // queries without any valid positive

  double rank(std::size_t r) const { return r >= 1 && r <= cmc.size() ? cmc[r - 1] : 0.0; }
};

// Gallery entries sharing identity and camera with the query are ignored.
// Ranking is by descending score, ties kept in gallery order.
RetrievalResult evaluate_retrieval(const std::vector<double>& scores, const std::vector<int>& query_labels,
                                   const std::vector<int>& query_cameras, const std::vector<int>& gallery_labels,
                                   const std::vector<int>& gallery_cameras, std::size_t max_rank = 20);

// V_f^a for every clip, eval mode, in clip order.
Embeddings extract_representations(CtlModel<float>& model, const ClipSet& clips, std::size_t batch_clips = 16);

// Query: test clips from camera 0. Gallery: every test clip.
RetrievalResult evaluate_model(CtlModel<float>& model, const ClipSet& test, Similarity metric);

std::string format_report(const RetrievalResult& result);

}  // namespace ctl
