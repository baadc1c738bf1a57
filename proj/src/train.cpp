#include "dcton/train.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dcton/errors.hpp"
#include "dcton/geometry.hpp"
#include "dcton/rng.hpp"

namespace dcton::train {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw InvalidArgument("config: " + key + " expects a number, got '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw InvalidArgument("config: " + key + " expects an integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw InvalidArgument("config: " + key + " expects true/false, got '" + text + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_dataset(const std::vector<data::TryOnSample>& dataset, const char* what) {
  if (dataset.empty()) throw InvalidArgument(std::string(what) + ": dataset is empty");
  const int h = dataset.front().height(), w = dataset.front().width();
  data::check_image_size(h, w);
  for (const auto& s : dataset) {
    if (s.height() != h || s.width() != w) {
      throw InvalidArgument(std::string(what) + ": sample " + s.id + " differs in size");
    }
  }
}

torch::optim::Adam make_adam(std::vector<torch::Tensor> params, double lr, const TrainConfig& c) {
  return torch::optim::Adam(std::move(params),
                            torch::optim::AdamOptions(lr).betas({c.adam_beta1, c.adam_beta2}));
}

std::string indexed(const std::string& prefix, size_t i, const char* field) {
  return prefix + "." + std::to_string(i) + "." + field;
}

void collect_adam(torch::optim::Adam& opt, const std::string& prefix, nets::Checkpoint& out) {
  const auto& params = opt.param_groups().at(0).params();
  auto& state = opt.state();
  for (size_t i = 0; i < params.size(); ++i) {
    auto it = state.find(params[i].unsafeGetTensorImpl());
    if (it == state.end()) continue;
    auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
    out.tensors.emplace_back(indexed(prefix, i, "step"), torch::tensor(s.step(), torch::kInt64));
    out.tensors.emplace_back(indexed(prefix, i, "exp_avg"), s.exp_avg().clone());
    out.tensors.emplace_back(indexed(prefix, i, "exp_avg_sq"), s.exp_avg_sq().clone());
  }
}

void restore_adam(torch::optim::Adam& opt, const std::string& prefix,
                  const nets::Checkpoint& ckpt) {
  const auto& params = opt.param_groups().at(0).params();
  auto& state = opt.state();
  state.clear();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto* step = ckpt.find(indexed(prefix, i, "step"));
    if (!step) continue;
    const auto* avg = ckpt.find(indexed(prefix, i, "exp_avg"));
    const auto* avg_sq = ckpt.find(indexed(prefix, i, "exp_avg_sq"));
    if (!avg || !avg_sq || avg->sizes() != params[i].sizes() ||
        avg_sq->sizes() != params[i].sizes()) {
      throw FormatError("checkpoint optimizer state " + prefix + "." + std::to_string(i) +
                        " is incomplete");
    }
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(step->item<std::int64_t>());
    s->exp_avg(avg->clone());
    s->exp_avg_sq(avg_sq->clone());
    state[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

torch::Tensor stack_field(const std::vector<data::TryOnSample>& dataset,
                          std::span<const int> indices,
                          torch::Tensor data::TryOnSample::*field) {
  std::vector<torch::Tensor> items;
  items.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(dataset.size())) {
      throw InvalidArgument("batch index " + std::to_string(i) + " out of range");
    }
    items.push_back(dataset[i].*field);
  }
  return torch::stack(items);
}

std::string epoch_dir_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d", epoch);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be positive");
  if (!(stn_lr > 0.0) || !std::isfinite(stn_lr)) {
    throw InvalidArgument("STN learning rate must be positive");
  }
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (checkpoint_every < 1) throw InvalidArgument("checkpoint interval must be >= 1");
  if (stn_steps < 0) throw InvalidArgument("STN steps must be >= 0");
  lambdas.validate();
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"epochs", std::to_string(epochs)},
      {"lr", format_double(lr)},
      {"adam_beta1", format_double(adam_beta1)},
      {"adam_beta2", format_double(adam_beta2)},
      {"lambda_cyc", format_double(lambdas.lambda_cyc)},
      {"lambda_vgg", format_double(lambdas.lambda_vgg)},
      {"lambda_pre", format_double(lambdas.lambda_pre)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"ablate_skin_encoder", ablate_skin_encoder ? "true" : "false"},
      {"ablate_stn_reg", ablate_stn_reg ? "true" : "false"},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"stn_steps", std::to_string(stn_steps)},
      {"stn_lr", format_double(stn_lr)},
  };
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "lr") c.lr = parse_double(key, value);
    else if (key == "adam_beta1") c.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2") c.adam_beta2 = parse_double(key, value);
    else if (key == "lambda_cyc") c.lambdas.lambda_cyc = parse_double(key, value);
    else if (key == "lambda_vgg") c.lambdas.lambda_vgg = parse_double(key, value);
    else if (key == "lambda_pre") c.lambdas.lambda_pre = parse_double(key, value);
    else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "ablate_skin_encoder") c.ablate_skin_encoder = parse_bool(key, value);
    else if (key == "ablate_stn_reg") c.ablate_stn_reg = parse_bool(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_int(key, value));
    else if (key == "stn_steps") c.stn_steps = static_cast<int>(parse_int(key, value));
    else if (key == "stn_lr") c.stn_lr = parse_double(key, value);
    else throw InvalidArgument("config: unknown key '" + key + "'");
  }
  return c;
}

TrainConfig read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("config file not found: " + path.string());
  std::map<std::string, std::string> kv;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return TrainConfig::from_map(kv);
}

void write_config(const fs::path& path, const TrainConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [key, value] : config.to_map()) out << key << " = " << value << '\n';
}

// ---------------------------------------------------------------------------
// Batches

nets::MaskPair Batch::layout() const {
  return {(parse == data::kClothes).unsqueeze(1).to(torch::kFloat32),
          (parse == data::kSkin).unsqueeze(1).to(torch::kFloat32)};
}

Batch make_batch(const std::vector<data::TryOnSample>& dataset, std::span<const int> indices,
                 std::span<const int> targets) {
  if (indices.empty()) throw InvalidArgument("make_batch: no indices");
  if (!targets.empty() && targets.size() != indices.size()) {
    throw InvalidArgument("make_batch: targets and indices differ in length");
  }
  using S = data::TryOnSample;
  Batch b;
  b.person = stack_field(dataset, indices, &S::person);
  b.skin = stack_field(dataset, indices, &S::skin);
  b.clothes_self = stack_field(dataset, indices, &S::clothes_self);
  b.clothes_target = targets.empty() ? stack_field(dataset, indices, &S::clothes_target)
                                     : stack_field(dataset, targets, &S::clothes_self);
  b.descriptor = stack_field(dataset, indices, &S::descriptor);
  b.parse = stack_field(dataset, indices, &S::parse);
  return b;
}

Batch self_tryon_batch(const std::vector<data::TryOnSample>& dataset,
                       std::span<const int> indices) {
  auto b = make_batch(dataset, indices);
  b.clothes_target = b.clothes_self;
  return b;
}

std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<size_t>(std::max(n, 0)));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0xA24BAED4963EE407ull, static_cast<std::uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  return order;
}

std::vector<int> epoch_targets(int n, std::uint64_t seed, int epoch) {
  std::vector<int> targets(static_cast<size_t>(std::max(n, 0)));
  Rng rng(seed ^ 0x9FB21C651E98DF25ull, static_cast<std::uint64_t>(epoch));
  for (int i = 0; i < n; ++i) {
    if (n == 1) {
      targets[i] = i;
      continue;
    }
    int j = rng.below(n - 1);
    if (j >= i) ++j;
    targets[i] = j;
  }
  return targets;
}

// ---------------------------------------------------------------------------
// STN pretraining

StnPretrainResult pretrain_stn(const std::vector<data::TryOnSample>& dataset,
                               const TrainConfig& config) {
  config.validate();
  check_dataset(dataset, "pretrain_stn");
  torch::manual_seed(config.seed);
  nets::Stn stn;
  nets::init_weights(*stn, config.seed);
  auto opt = make_adam(stn->parameters(), config.stn_lr, config);

  const int n = static_cast<int>(dataset.size());
  const int bs = std::min(config.batch_size, n);
  auto t_prev = geometry::homogeneous_points(stn->canonical).to(torch::kFloat32);

  StnPretrainResult result;
  std::vector<int> order;
  int pass = -1;
  size_t cursor = 0;
  for (int step = 0; step < config.stn_steps; ++step) {
    std::vector<int> idx;
    while (static_cast<int>(idx.size()) < bs) {
      if (cursor >= order.size()) {
        order = epoch_order(n, config.seed, ++pass);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    const auto batch = make_batch(dataset, idx);
    const auto mask = batch.layout().clothes;
    auto out = stn->forward(mask, batch.clothes_self);
    auto warped = stn->warp(batch.clothes_self, out.dst);
    auto loss = losses::stn_pretrain_loss(warped, batch.person, mask, t_prev, out.transform,
                                          !config.ablate_stn_reg);
    opt.zero_grad();
    loss.total.backward();
    opt.step();
    t_prev = out.transform.detach().mean(0);

    losses::LossReport r;
    r.iteration = step + 1;
    r.stn_a = loss.appearance.item<double>();
    r.stn_rb = loss.regularization.item<double>();
    if (!std::isfinite(r.stn_a) || !std::isfinite(r.stn_rb)) {
      throw Diverged("STN pretraining diverged at step " + std::to_string(step + 1), r);
    }
    result.log.push_back(r);
  }
  result.stn = stn;
  return result;
}

nets::Checkpoint stn_checkpoint(const nets::Stn& stn, const TrainConfig& config) {
  nets::Checkpoint ckpt;
  nets::collect(*stn, "stn", ckpt);
  ckpt.config = config.to_map();
  ckpt.config["kind"] = "stn";
  return ckpt;
}

nets::Stn load_stn(const nets::Checkpoint& ckpt) {
  nets::Stn stn;
  nets::restore(*stn, "stn", ckpt);
  return stn;
}

// ---------------------------------------------------------------------------
// Cycle training

CycleTrainer::CycleTrainer(const TrainConfig& config, const nets::Stn& pretrained_stn)
    : config_(config) {
  config_.validate();
  model_ = nets::make_model({!config_.ablate_skin_encoder, data::kDescriptorChannels},
                            config_.seed);
  {
    nets::Checkpoint stn_weights;
    nets::collect(*pretrained_stn, "stn", stn_weights);
    nets::restore(*model_->stn, "stn", stn_weights);
  }
  for (auto& p : model_->stn->parameters()) p.requires_grad_(false);
  disc_person_ = nets::make_discriminator(config_.seed + 1);
  disc_skin_ = nets::make_discriminator(config_.seed + 2);
  opt_gen_ = std::make_unique<torch::optim::Adam>(
      make_adam(model_->generator_parameters(), config_.lr, config_));
  opt_person_ = std::make_unique<torch::optim::Adam>(
      make_adam(disc_person_->parameters(), config_.lr, config_));
  opt_skin_ = std::make_unique<torch::optim::Adam>(
      make_adam(disc_skin_->parameters(), config_.lr, config_));
  extractor_ = std::make_unique<losses::RandomConvExtractor>();
}

CycleState CycleTrainer::run_cycle(const Batch& batch) {
  CycleState s;
  // I1 wearing C2, then back to C1 from the generated person.
  s.forward = model_->forward(batch.person, batch.skin, batch.clothes_target, batch.descriptor);
  s.skin_fwd = s.forward.masks.skin * s.forward.image;
  s.backward = model_->forward(s.forward.image, s.skin_fwd, batch.clothes_self, batch.descriptor);
  s.skin_back = s.backward.masks.skin * s.backward.image;
  return s;
}

CycleTrainer::Losses CycleTrainer::compute(const Batch& batch) {
  Losses out;
  out.state = run_cycle(batch);
  const auto& fwd = out.state.forward;
  const auto& back = out.state.backward;
  const auto gt = batch.layout();

  losses::AdversarialScores scores;
  scores.person_fwd = disc_person_->forward(fwd.image);
  scores.person_back = disc_person_->forward(back.image);
  scores.skin_fwd = disc_skin_->forward(out.state.skin_fwd);
  scores.skin_back = disc_skin_->forward(out.state.skin_back);
  const auto adv = losses::adversarial_loss(scores).generator;
  const auto cyc = losses::cycle_loss(back.image, batch.person, out.state.skin_back, batch.skin);
  // Masks only weight these two terms; the MPN learns them from its L1 loss.
  const auto pre = losses::content_preserving_loss(fwd.image, back.image, batch.person,
                                                   fwd.masks.skin.detach(),
                                                   fwd.masks.clothes.detach());
  const auto vgg = losses::perceptual_loss(*extractor_, fwd.warped_clothes, fwd.image,
                                           fwd.masks.clothes.detach(), back.warped_clothes,
                                           back.image, back.masks.clothes.detach());
  const auto mpn = losses::mpn_mask_loss(fwd.masks, gt) + losses::mpn_mask_loss(back.masks, gt);

  out.objective = losses::total_loss(adv, cyc, vgg, pre, config_.lambdas) + mpn;
  auto& r = out.report;
  r.adv = adv.item<double>();
  r.cyc = cyc.item<double>();
  r.pre = pre.item<double>();
  r.vgg = vgg.item<double>();
  r.mpn = mpn.item<double>();
  r.total = losses::total_loss(r, config_.lambdas);
  r.iteration = iteration_ + 1;
  return out;
}

losses::LossReport CycleTrainer::step(const Batch& batch) {
  model_->train();
  auto l = compute(batch);
  if (!std::isfinite(l.objective.item<double>())) {
    throw Diverged("training diverged at iteration " + std::to_string(l.report.iteration),
                   l.report);
  }
  opt_gen_->zero_grad();
  l.objective.backward();
  opt_gen_->step();

  const auto i2 = l.state.forward.image.detach();
  const auto i1_back = l.state.backward.image.detach();
  const auto s2 = l.state.skin_fwd.detach();
  const auto s1_back = l.state.skin_back.detach();

  losses::AdversarialScores scores;
  scores.person_real = disc_person_->forward(batch.person);
  scores.person_fwd = disc_person_->forward(i2);
  scores.person_back = disc_person_->forward(i1_back);
  scores.skin_real = disc_skin_->forward(batch.skin);
  scores.skin_fwd = disc_skin_->forward(s2);
  scores.skin_back = disc_skin_->forward(s1_back);
  const auto d = losses::adversarial_loss(scores);

  opt_person_->zero_grad();
  d.person_disc.backward();
  opt_person_->step();
  opt_skin_->zero_grad();
  d.skin_disc.backward();
  opt_skin_->step();

  ++iteration_;
  return l.report;
}

losses::LossReport CycleTrainer::evaluate(const Batch& batch) {
  torch::NoGradGuard no_grad;
  return compute(batch).report;
}

nets::Checkpoint CycleTrainer::checkpoint(int epoch) const {
  nets::Checkpoint ckpt;
  nets::collect(*model_, "model", ckpt);
  nets::collect(*disc_person_, "disc_person", ckpt);
  nets::collect(*disc_skin_, "disc_skin", ckpt);
  collect_adam(*opt_gen_, "adam_gen", ckpt);
  collect_adam(*opt_person_, "adam_person", ckpt);
  collect_adam(*opt_skin_, "adam_skin", ckpt);
  ckpt.config = config_.to_map();
  ckpt.config["kind"] = "dcton";
  ckpt.config["epoch"] = std::to_string(epoch);
  ckpt.config["iteration"] = std::to_string(iteration_);
  ckpt.config["skin_encoder"] = config_.ablate_skin_encoder ? "false" : "true";
  return ckpt;
}

int CycleTrainer::restore(const nets::Checkpoint& ckpt) {
  const auto get = [&](const char* key) {
    auto it = ckpt.config.find(key);
    if (it == ckpt.config.end()) throw FormatError(std::string("checkpoint lacks '") + key + "'");
    return it->second;
  };
  if (get("kind") != "dcton") throw FormatError("not a try-on training checkpoint");
  if (parse_bool("skin_encoder", get("skin_encoder")) == config_.ablate_skin_encoder) {
    throw InvalidArgument("checkpoint and config disagree on the skin encoder");
  }
  nets::restore(*model_, "model", ckpt);
  nets::restore(*disc_person_, "disc_person", ckpt);
  nets::restore(*disc_skin_, "disc_skin", ckpt);
  restore_adam(*opt_gen_, "adam_gen", ckpt);
  restore_adam(*opt_person_, "adam_person", ckpt);
  restore_adam(*opt_skin_, "adam_skin", ckpt);
  for (auto& p : model_->stn->parameters()) p.requires_grad_(false);
  iteration_ = parse_int("iteration", get("iteration"));
  return static_cast<int>(parse_int("epoch", get("epoch")));
}

// ---------------------------------------------------------------------------
// Epoch loop

std::string loss_log_row(const losses::LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                static_cast<long long>(r.iteration), r.adv, r.cyc, r.pre, r.vgg, r.mpn, r.total);
  return buf;
}

std::vector<losses::LossReport> read_loss_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("loss log not found: " + path.string());
  std::string header;
  std::getline(in, header);
  if (trim(header) != kLossLogHeader) throw FormatError(path.string() + ": unexpected header");
  std::vector<losses::LossReport> rows;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (cells.size() != 7) throw FormatError(path.string() + ": malformed row '" + line + "'");
    losses::LossReport r;
    r.iteration = parse_int("iteration", cells[0]);
    r.adv = parse_double("adv", cells[1]);
    r.cyc = parse_double("cyc", cells[2]);
    r.pre = parse_double("pre", cells[3]);
    r.vgg = parse_double("vgg", cells[4]);
    r.mpn = parse_double("mpn", cells[5]);
    r.total = parse_double("total", cells[6]);
    rows.push_back(r);
  }
  return rows;
}

TrainOutcome train_dcton(const std::vector<data::TryOnSample>& dataset,
                         const nets::Stn& pretrained_stn, const TrainConfig& config,
                         const fs::path& out_dir, const std::optional<fs::path>& resume_from,
                         const std::function<void(const losses::LossReport&)>& on_step) {
  check_dataset(dataset, "train");
  config.validate();
  CycleTrainer trainer(config, pretrained_stn);
  int start_epoch = 0;
  if (resume_from) start_epoch = trainer.restore(nets::load_checkpoint(*resume_from));

  std::error_code ec;
  fs::create_directories(out_dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_config(out_dir / "config.txt", config);

  TrainOutcome outcome;
  const auto log_path = out_dir / "loss_log.csv";
  if (resume_from && fs::exists(log_path)) {
    for (const auto& r : read_loss_log(log_path)) {
      if (r.iteration <= trainer.iteration()) outcome.log.push_back(r);
    }
  }
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  log << kLossLogHeader << '\n';
  for (const auto& r : outcome.log) log << loss_log_row(r) << '\n';
  log.flush();

  const int n = static_cast<int>(dataset.size());
  const int bs = std::min(config.batch_size, n);
  outcome.epochs_completed = start_epoch;
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    const auto targets = epoch_targets(n, config.seed, epoch);
    for (int start = 0; start < n; start += bs) {
      const int end = std::min(start + bs, n);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      std::vector<int> tgt;
      for (int i : idx) tgt.push_back(targets[i]);
      const auto report = trainer.step(make_batch(dataset, idx, tgt));
      outcome.log.push_back(report);
      log << loss_log_row(report) << '\n';
      log.flush();
      if (on_step) on_step(report);
    }
    outcome.epochs_completed = epoch + 1;
    if ((epoch + 1) % config.checkpoint_every == 0 || epoch + 1 == config.epochs) {
      const auto dir = out_dir / "checkpoints" / epoch_dir_name(epoch + 1);
      nets::save_checkpoint(dir, trainer.checkpoint(epoch + 1));
      outcome.final_checkpoint = dir;
      std::ofstream(out_dir / "latest.txt", std::ios::trunc) << fs::relative(dir, out_dir).string()
                                                             << '\n';
    }
  }
  if (outcome.final_checkpoint.empty() && resume_from) outcome.final_checkpoint = *resume_from;
  return outcome;
}

nets::TryOnModel load_model(const nets::Checkpoint& ckpt) {
  bool skin = true;
  if (auto it = ckpt.config.find("skin_encoder"); it != ckpt.config.end()) {
    skin = parse_bool("skin_encoder", it->second);
  }
  auto model = nets::TryOnModel(nets::ModelConfig{skin, data::kDescriptorChannels});
  nets::restore(*model, "model", ckpt);
  model->eval();
  return model;
}

}  // namespace dcton::train
