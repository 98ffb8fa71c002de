#include "lsc/refnet/trainer.hpp"

#include "lsc/random.hpp"

namespace lsc::nn {

TrainSample make_sample(const Tensor& image, LabelGridSet labels) {
  TrainSample s;
  s.image = pad_to_frame(image, labels.frame);
  s.labels = std::move(labels);
  return s;
}

void SgdMomentum::step(std::vector<Parameter>& params, const Gradients& grads) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
  }
  if (velocity_.size() != params.size() || grads.values.size() != params.size()) {
    throw Error("optimizer state does not match the parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = velocity_[i];
    auto& theta = params[i].value;
    const auto& g = grads.values[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      v[j] = mu_ * v[j] - lr_ * g[j];
      theta[j] += v[j];
    }
  }
}

Trainer::Trainer(RefNet& net, const std::vector<TrainSample>& data, LossWeights weights, LossMode mode)
    : net_(net), data_(data), weights_(std::move(weights)), mode_(mode),
      opt_(net.config().learning_rate, net.config().momentum) {
  if (data_.empty()) throw Error("cannot train on an empty dataset");
}

std::vector<std::size_t> Trainer::batch_indices(std::int64_t t) const {
  const auto n = static_cast<std::int64_t>(data_.size());
  const std::int64_t batch = net_.config().batch_size;
  std::vector<std::size_t> out;
  std::int64_t cached_epoch = -1;
  std::vector<std::size_t> order;
  for (std::int64_t i = 0; i < batch; ++i) {
    const std::int64_t pos = t * batch + i;
    const std::int64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      SplitMix64 rng(net_.config().seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(epoch + 1)));
      order = permutation(data_.size(), rng);
      cached_epoch = epoch;
    }
    out.push_back(order[static_cast<std::size_t>(pos % n)]);
  }
  return out;
}

TraceRow Trainer::step() {
  const auto batch = batch_indices(step_);
  Gradients total = net_.graph().make_gradients();
  TraceRow row;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainSample& sample = data_[batch[i]];
    const auto pass = net_.forward(sample.image, sample.labels.frame);
    const auto report = gwta_loss(pass.scores, sample.labels, weights_.alpha_bar, &weights_.alpha);
    const auto logit_grads = mode_ == LossMode::WinnerTakeAll
                                 ? gwta_logit_gradient(pass.scores, sample.labels, weights_.alpha_bar)
                                 : combined_logit_gradient(pass.scores, sample.labels, weights_.alpha);
    total += net_.backward(pass, logit_grads);
    row.l_wta += report.l_wta;
    row.l_comb += report.l_comb;
    if (i == 0) row.winners = report.winners;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total *= inv;
  row.l_wta *= inv;
  row.l_comb *= inv;
  opt_.step(net_.graph().parameters(), total);
  row.step = ++step_;
  return row;
}

std::vector<TraceRow> Trainer::run(std::int64_t steps, const std::function<void(const TraceRow&)>& on_step) {
  std::vector<TraceRow> trace;
  trace.reserve(static_cast<std::size_t>(std::max<std::int64_t>(steps, 0)));
  for (std::int64_t i = 0; i < steps; ++i) {
    trace.push_back(step());
    if (on_step) on_step(trace.back());
  }
  return trace;
}

}  // namespace lsc::nn
