#include "utopk/relation.hpp"

#include <string>

#include "utopk/errors.hpp"

namespace utopk {

UncertainRelation UncertainRelation::build(std::vector<XTuple> entries, const ScoreGrid& grid) {
  UncertainRelation rel;
  rel.grid_ = grid;
  rel.rows_.reserve(entries.size());
  rel.index_.reserve(entries.size());
  for (auto& entry : entries) {
    if (rel.index_.contains(entry.frame_id)) {
      throw DuplicateFrame("duplicate frame id " + std::to_string(entry.frame_id));
    }
    if (!entry.is_certain() && !(entry.distribution().grid() == grid)) {
      throw GridMismatch("frame " + std::to_string(entry.frame_id) +
                         " is quantized on a different grid");
    }
    rel.index_.emplace(entry.frame_id, rel.rows_.size());
    Row row{std::move(entry), std::nullopt};
    if (row.tuple.is_certain()) {
      rel.ranked_certain_.emplace(-row.tuple.certain_score(), row.tuple.frame_id);
    } else {
      row.prior = row.tuple.distribution();
      ++rel.initially_uncertain_;
    }
    rel.rows_.push_back(std::move(row));
  }

  // F_f(t) = 0 for t below the support and 1 from its top bin on, so the zero
  // and below-one counts come from histograms and only the interior of each
  // support touches the log sums.
  const auto bins = static_cast<std::size_t>(grid.bins);
  std::vector<std::int64_t> starts(bins + 1, 0);
  std::vector<std::int64_t> ends(bins + 1, 0);
  std::vector<CompensatedSum> logs(bins);
  for (const auto& row : rel.rows_) {
    if (!row.prior) {
      continue;
    }
    const auto& dist = *row.prior;
    ++starts[static_cast<std::size_t>(dist.min_bin())];
    ++ends[static_cast<std::size_t>(dist.max_bin())];
    for (Bin t = dist.min_bin(); t < dist.max_bin(); ++t) {
      logs[static_cast<std::size_t>(t)] += std::log(dist.cdf(t));
    }
  }
  rel.h_zeros_.assign(bins, 0);
  rel.h_below_one_.assign(bins, 0);
  rel.h_log_.assign(bins, 0.0);
  std::int64_t started = 0;
  std::int64_t finished = 0;
  const auto total = static_cast<std::int64_t>(rel.initially_uncertain_);
  for (std::size_t t = 0; t < bins; ++t) {
    started += starts[t];
    finished += ends[t];
    rel.h_zeros_[t] = total - started;
    rel.h_below_one_[t] = total - finished;
    rel.h_log_[t] = logs[t].value();
  }
  return rel;
}

std::size_t UncertainRelation::row_index(FrameId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw UnknownFrame("unknown frame id " + std::to_string(id));
  }
  return it->second;
}

const XTuple& UncertainRelation::tuple(FrameId id) const { return rows_[row_index(id)].tuple; }

std::vector<FrameId> UncertainRelation::frame_ids() const {
  std::vector<FrameId> out;
  out.reserve(rows_.size());
  for (const auto& row : rows_) {
    out.push_back(row.tuple.frame_id);
  }
  return out;
}

std::vector<FrameId> UncertainRelation::uncertain_ids() const {
  std::vector<FrameId> out;
  out.reserve(uncertain_count());
  for (const auto& row : rows_) {
    if (!row.tuple.is_certain()) {
      out.push_back(row.tuple.frame_id);
    }
  }
  return out;
}

std::vector<FrameId> UncertainRelation::certain_ids() const {
  std::vector<FrameId> out;
  out.reserve(certain_count());
  for (const auto& row : rows_) {
    if (row.tuple.is_certain()) {
      out.push_back(row.tuple.frame_id);
    }
  }
  return out;
}

const DiscreteScoreDist* UncertainRelation::prior(FrameId id) const {
  const auto& row = rows_[row_index(id)];
  return row.prior ? &*row.prior : nullptr;
}

double UncertainRelation::prior_cdf(FrameId id, Bin t) const {
  const auto* dist = prior(id);
  if (dist == nullptr) {
    throw InvalidArgument("frame " + std::to_string(id) + " was certain from the start");
  }
  return dist->cdf(t);
}

LogProduct UncertainRelation::initial_joint(Bin t) const {
  const auto total = static_cast<std::int64_t>(initially_uncertain_);
  if (t < 0) {
    return {total, total, 0.0};
  }
  if (t >= grid_.bins) {
    return {};
  }
  const auto i = static_cast<std::size_t>(t);
  return {h_zeros_[i], h_below_one_[i], h_log_[i]};
}

LogProduct UncertainRelation::uncertain_joint(Bin t, std::uint64_t* lookups) const {
  LogProduct joint = initial_joint(t);
  for (const FrameId id : cleaned_) {
    joint.divide(rows_[index_.at(id)].prior->cdf(t));
  }
  if (lookups != nullptr) {
    *lookups += 1 + cleaned_.size();
  }
  return joint;
}

LogProduct UncertainRelation::direct_uncertain_joint(Bin t) const {
  LogProduct joint;
  for (const auto& row : rows_) {
    if (!row.tuple.is_certain()) {
      joint.multiply(row.tuple.distribution().cdf(t));
    }
  }
  return joint;
}

void UncertainRelation::clean(FrameId id, Bin true_score) {
  auto& row = rows_[row_index(id)];
  if (row.tuple.is_certain()) {
    throw AlreadyCertain("frame " + std::to_string(id) + " is already certain");
  }
  row.tuple.state = true_score;
  ranked_certain_.emplace(-true_score, id);
  cleaned_.push_back(id);
}

TopKAnswer UncertainRelation::topk_certain(std::size_t k) const {
  if (k == 0) {
    throw InvalidArgument("K must be at least 1");
  }
  if (ranked_certain_.size() < k) {
    throw InsufficientCertain("only " + std::to_string(ranked_certain_.size()) +
                              " certain frames for K = " + std::to_string(k));
  }
  TopKAnswer answer;
  answer.members.reserve(k);
  for (auto it = ranked_certain_.begin(); answer.members.size() < k; ++it) {
    answer.members.push_back({it->second, -it->first});
  }
  answer.threshold = answer.members.back().score;
  answer.penultimate = k == 1 ? kUnboundedBin : answer.members[k - 2].score;
  return answer;
}

}  // namespace utopk
