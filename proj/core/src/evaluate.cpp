#include "ctl/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ctl {

std::vector<double> similarity_matrix(const Embeddings& queries, const Embeddings& gallery, Similarity metric) {
  std::vector<double> out(queries.size() * gallery.size());
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      const auto& a = queries[q];
      const auto& b = gallery[g];
      if (a.size() != b.size()) throw DimensionError("embedding lengths differ");
      double dot = 0, na = 0, nb = 0, d2 = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
        d2 += (a[i] - b[i]) * (a[i] - b[i]);
      }
      out[q * gallery.size() + g] =
          metric == Similarity::kCosine ? dot / std::max(std::sqrt(na) * std::sqrt(nb), 1e-12) : -std::sqrt(d2);
    }
  return out;
}

RetrievalResult evaluate_retrieval(const std::vector<double>& scores, const std::vector<int>& query_labels,
                                   const std::vector<int>& query_cameras, const std::vector<int>& gallery_labels,
                                   const std::vector<int>& gallery_cameras, std::size_t max_rank) {
  const std::size_t nq = query_labels.size(), ng = gallery_labels.size();
  if (query_cameras.size() != nq || gallery_cameras.size() != ng || scores.size() != nq * ng) {
    throw DimensionError("evaluate_retrieval: inconsistent query/gallery sizes");
  }
  RetrievalResult result;
  std::vector<std::size_t> hits(max_rank, 0);
  double ap_sum = 0.0;
  std::vector<std::size_t> order(ng);
  for (std::size_t q = 0; q < nq; ++q) {
    const double* row = &scores[q * ng];
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    std::size_t rank = 0, found = 0, first = 0;
    double ap = 0.0;
    for (auto g : order) {
      const bool same_id = gallery_labels[g] == query_labels[q];
      if (same_id && gallery_cameras[g] == query_cameras[q]) continue;
      ++rank;
      if (!same_id) continue;
      ++found;
      if (found == 1) first = rank;
      ap += static_cast<double>(found) / static_cast<double>(rank);
    }
    if (found == 0) {
      ++result.skipped;
      continue;
    }
    ++result.evaluated;
    ap_sum += ap / static_cast<double>(found);
    for (std::size_t r = first; r <= max_rank; ++r) ++hits[r - 1];
  }
  result.cmc.resize(max_rank, 0.0);
  if (result.evaluated > 0) {
    for (std::size_t r = 0; r < max_rank; ++r) {
      result.cmc[r] = static_cast<double>(hits[r]) / static_cast<double>(result.evaluated);
    }
    result.map = ap_sum / static_cast<double>(result.evaluated);
  }
  return result;
}

Embeddings extract_representations(CtlModel<float>& model, const ClipSet& clips, std::size_t batch_clips) {
  Embeddings out;
  batch_clips = std::max<std::size_t>(1, batch_clips);
  for (std::size_t start = 0; start < clips.size(); start += batch_clips) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(clips.size(), start + batch_clips); ++i) idx.push_back(i);
    const auto batch = clips.select(idx);
    const auto result = model.forward(batch.features, batch.heatmaps, idx.size(), false);
    const auto data = result.reps.aggregate.data();
    const std::size_t c = result.reps.aggregate.shape()[1];
    for (std::size_t i = 0; i < idx.size(); ++i) out.emplace_back(data.begin() + i * c, data.begin() + (i + 1) * c);
  }
  return out;
}

RetrievalResult evaluate_model(CtlModel<float>& model, const ClipSet& test, Similarity metric) {
  const auto all = extract_representations(model, test);
  Embeddings queries;
  std::vector<int> q_labels, q_cams;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.cameras[i] != 0) continue;
    queries.push_back(all[i]);
    q_labels.push_back(test.labels[i]);
    q_cams.push_back(test.cameras[i]);
  }
  const auto scores = similarity_matrix(queries, all, metric);
  return evaluate_retrieval(scores, q_labels, q_cams, test.labels, test.cameras);
}

std::string format_report(const RetrievalResult& result) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  out << "| metric | value |\n|---|---|\n";
  for (std::size_t r : {1, 5, 10, 20}) {
    if (r <= result.cmc.size()) out << "| Rank-" << r << " | " << result.rank(r) << " |\n";
  }
  out << "| mAP | " << result.map << " |\n";
  out << "| queries | " << result.evaluated << " |\n";
  if (result.skipped) out << "| skipped queries | " << result.skipped << " |\n";
  return out.str();
}

}  // namespace ctl
