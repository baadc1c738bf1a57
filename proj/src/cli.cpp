#include "dcton/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dcton/data.hpp"
#include "dcton/errors.hpp"
#include "dcton/image.hpp"
#include "dcton/metrics.hpp"
#include "dcton/tensor_file.hpp"
#include "dcton/train.hpp"

namespace dcton::cli {

namespace fs = std::filesystem;

namespace {

struct Size {
  int height = 64;
  int width = 48;
};

Size parse_size(const std::string& text) {
  const auto x = text.find_first_of("xX");
  Size s;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    size_t used = 0;
    s.height = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    s.width = std::stoi(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw InvalidArgument("--size expects HxW, got '" + text + "'");
  }
  return s;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) parts.push_back(part);
  return parts;
}

/// Flags shared by the training subcommands.
struct TrainFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  int epochs = -1;
  int batch_size = -1;
  int steps = -1;
  int checkpoint_every = -1;
  double lr = -1.0;
  double lambda_cyc = -1.0;
  double lambda_vgg = -1.0;
  double lambda_pre = -1.0;
  bool no_skin_encoder = false;
  bool no_stn_reg = false;

  void add_to(CLI::App& app, bool cycle) {
    app.add_option("--config", config_path, "key=value training config file");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--batch-size", batch_size, "batch size");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_flag("--no-stn-reg", no_stn_reg, "drop the homography regularizer (ablation)");
    if (cycle) {
      app.add_option("--epochs", epochs, "training epochs");
      app.add_option("--checkpoint-every", checkpoint_every, "epochs between checkpoints");
      app.add_option("--lambda-cyc", lambda_cyc, "cycle loss weight");
      app.add_option("--lambda-vgg", lambda_vgg, "perceptual loss weight");
      app.add_option("--lambda-pre", lambda_pre, "content-preserving loss weight");
      app.add_flag("--no-skin-encoder", no_skin_encoder, "drop the skin encoder (ablation)");
    } else {
      app.add_option("--steps", steps, "pretraining steps");
    }
  }

  train::TrainConfig resolve(const CLI::App& app, bool cycle) const {
    auto c = config_path.empty() ? train::TrainConfig{} : train::read_config(config_path);
    if (app.count("--seed") || config_path.empty()) c.seed = seed;
    if (batch_size > 0) c.batch_size = batch_size;
    if (no_stn_reg) c.ablate_stn_reg = true;
    if (cycle) {
      if (lr > 0) c.lr = lr;
      if (epochs >= 0) c.epochs = epochs;
      if (checkpoint_every > 0) c.checkpoint_every = checkpoint_every;
      if (lambda_cyc >= 0) c.lambdas.lambda_cyc = lambda_cyc;
      if (lambda_vgg >= 0) c.lambdas.lambda_vgg = lambda_vgg;
      if (lambda_pre >= 0) c.lambdas.lambda_pre = lambda_pre;
      if (no_skin_encoder) c.ablate_skin_encoder = true;
    } else {
      if (lr > 0) c.stn_lr = lr;
      if (steps >= 0) c.stn_steps = steps;
    }
    c.validate();
    return c;
  }
};

torch::Tensor batched(const torch::Tensor& t) { return t.unsqueeze(0); }

}  // namespace

fs::path resolve_checkpoint(const fs::path& path) {
  if (fs::exists(path / "manifest.txt")) return path;
  std::ifstream latest(path / "latest.txt");
  std::string rel;
  if (latest && std::getline(latest, rel) && !rel.empty()) return path / rel;
  throw NotFound("no checkpoint at " + path.string());
}

InferResult infer(nets::TryOnModel& model, const torch::Tensor& person,
                  const torch::Tensor& clothes, const torch::Tensor& descriptor,
                  const torch::Tensor& parse) {
  if (person.dim() != 3 || clothes.dim() != 3 || descriptor.dim() != 3 || parse.dim() != 2) {
    throw InvalidArgument("infer: expected unbatched person, clothes, descriptor and parse");
  }
  if (clothes.sizes() != person.sizes() || descriptor.size(1) != person.size(1) ||
      descriptor.size(2) != person.size(2) || parse.size(0) != person.size(1) ||
      parse.size(1) != person.size(2)) {
    throw InvalidArgument("infer: input sizes differ");
  }
  data::check_image_size(static_cast<int>(person.size(1)), static_cast<int>(person.size(2)));
  torch::NoGradGuard no_grad;
  model->eval();
  InferResult r;
  r.skin = data::extract_skin(person, parse);
  const auto before = model->passes;
  r.raw = model->forward(batched(person), batched(r.skin), batched(clothes), batched(descriptor));
  r.passes = model->passes - before;
  r.image = r.raw.image[0];
  return r;
}

void write_inference(const InferResult& r, const fs::path& out,
                     const std::optional<fs::path>& debug_dir) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out, r.image);
  if (!debug_dir) return;
  fs::create_directories(*debug_dir);
  const auto stem = out.stem().string();
  auto mask_rgb = [](const torch::Tensor& m) { return (m[0] * 2.0 - 1.0).expand({3, -1, -1}); };
  write_png(*debug_dir / (stem + "_warped_clothes.png"), r.raw.warped_clothes[0]);
  write_png(*debug_dir / (stem + "_mask_clothes.png"), mask_rgb(r.raw.masks.clothes[0]));
  write_png(*debug_dir / (stem + "_mask_skin.png"), mask_rgb(r.raw.masks.skin[0]));
  write_png(*debug_dir / (stem + "_skin.png"), r.skin);
}

torch::Tensor compose_grid(const std::vector<std::array<torch::Tensor, 3>>& cases) {
  if (cases.empty()) throw InvalidArgument("grid: no cases given");
  const auto h = cases[0][0].size(1), w = cases[0][0].size(2);
  for (const auto& row : cases) {
    for (const auto& img : row) {
      if (img.dim() != 3 || img.size(0) != 3 || img.size(1) != h || img.size(2) != w) {
        throw InvalidArgument("grid: all images must be [3,H,W] of one size");
      }
    }
  }
  const auto n = static_cast<int64_t>(cases.size());
  auto canvas = torch::ones({3, n * h + (n + 1) * kGutter, 3 * w + 4 * kGutter}, torch::kFloat32);
  for (int64_t r = 0; r < n; ++r) {
    const auto top = kGutter + r * (h + kGutter);
    for (int64_t c = 0; c < 3; ++c) {
      const auto left = kGutter + c * (w + kGutter);
      canvas.slice(1, top, top + h).slice(2, left, left + w).copy_(cases[r][c]);
    }
  }
  return canvas;
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"dcton: disentangled cycle-consistent virtual try-on"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render a synthetic try-on dataset");
  std::string gen_out, size_text = "64x48";
  data::DatasetSpec spec;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", spec.count, "number of samples");
  gen->add_option("--seed", spec.seed, "random seed");
  gen->add_option("--size", size_text, "image size HxW")
      ->check(CLI::Validator(
          [](std::string& text) {
            try {
              parse_size(text);
            } catch (const InvalidArgument& e) {
              return std::string(e.what());
            }
            return std::string();
          },
          "HxW"));
  gen->add_option("--styles", spec.clothes_styles, "number of clothes styles");

  // pretrain-stn
  auto* pre = app.add_subcommand("pretrain-stn", "pretrain the warping network");
  std::string pre_data, pre_out;
  TrainFlags pre_flags;
  pre->add_option("--data", pre_data, "dataset directory")->required();
  pre->add_option("--out", pre_out, "output checkpoint directory")->required();
  pre_flags.add_to(*pre, false);

  // train
  auto* tr = app.add_subcommand("train", "cycle-consistency training with a frozen STN");
  std::string tr_data, tr_stn, tr_out, tr_resume;
  TrainFlags tr_flags;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--stn", tr_stn, "pretrained STN checkpoint")->required();
  tr->add_option("--out", tr_out, "run directory")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to continue from");
  tr_flags.add_to(*tr, true);

  // infer
  auto* inf = app.add_subcommand("infer", "run the generator once per try-on");
  std::string inf_ckpt, inf_person, inf_clothes, inf_desc, inf_parse, inf_out, inf_debug,
      inf_data;
  bool inf_self = false;
  std::uint64_t inf_seed = 0;
  inf->add_option("--checkpoint", inf_ckpt, "checkpoint or run directory")->required();
  inf->add_option("--person", inf_person, "person PNG");
  inf->add_option("--clothes", inf_clothes, "target clothes PNG");
  inf->add_option("--descriptor", inf_desc, "surface descriptor tensor file");
  inf->add_option("--parse", inf_parse, "parse label PNG");
  inf->add_option("--data", inf_data, "dataset directory: process every sample");
  inf->add_flag("--self", inf_self, "with --data: wear the sample's own clothes");
  inf->add_option("--out", inf_out, "output PNG, or directory with --data")->required();
  inf->add_option("--debug", inf_debug, "directory for intermediates");
  inf->add_option("--seed", inf_seed, "random seed");

  // eval
  auto* ev = app.add_subcommand("eval", "SSIM, FID and IS over two image directories");
  std::string ev_pred, ev_ref, ev_backend = "random-conv", ev_out;
  int ev_splits = 10;
  std::uint64_t ev_seed = 0;
  ev->add_option("--pred", ev_pred, "generated images")->required();
  ev->add_option("--ref", ev_ref, "reference images")->required();
  ev->add_option("--backend", ev_backend, "embedding/classifier backend");
  ev->add_option("--splits", ev_splits, "inception score splits");
  ev->add_option("--out", ev_out, "CSV report path");
  ev->add_option("--seed", ev_seed, "random seed");

  // grid
  auto* gr = app.add_subcommand("grid", "compose input/clothes/result panels");
  std::vector<std::string> gr_cases;
  std::string gr_out;
  std::uint64_t gr_seed = 0;
  gr->add_option("--case", gr_cases, "input,clothes,result PNG triple (repeatable)")->required();
  gr->add_option("--out", gr_out, "output PNG")->required();
  gr->add_option("--seed", gr_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      const auto size = parse_size(size_text);
      spec.height = size.height;
      spec.width = size.width;
      const auto ids = data::generate_dataset(spec, gen_out);
      std::cout << "wrote " << ids.size() << " samples to " << gen_out << '\n';
    } else if (*pre) {
      const auto config = pre_flags.resolve(*pre, false);
      const auto dataset = data::load_dataset(pre_data);
      const auto result = train::pretrain_stn(dataset, config);
      nets::save_checkpoint(pre_out, train::stn_checkpoint(result.stn, config));
      std::ofstream log(fs::path(pre_out) / "stn_log.csv", std::ios::trunc);
      log << "step,appearance,regularization\n";
      for (const auto& r : result.log) {
        log << r.iteration << ',' << r.stn_a << ',' << r.stn_rb << '\n';
      }
      if (!result.log.empty()) {
        std::cout << "STN L_a " << result.log.front().stn_a << " -> " << result.log.back().stn_a
                  << " over " << result.log.size() << " steps\n";
      }
    } else if (*tr) {
      auto config = tr_flags.resolve(*tr, true);
      const auto dataset = data::load_dataset(tr_data);
      const auto stn = train::load_stn(nets::load_checkpoint(tr_stn));
      std::optional<fs::path> resume;
      if (!tr_resume.empty()) resume = resolve_checkpoint(tr_resume);
      const auto outcome = train::train_dcton(dataset, stn, config, tr_out, resume,
                                              [](const losses::LossReport& r) {
                                                if (r.iteration % 50 == 0) {
                                                  std::cout << train::loss_log_row(r) << '\n';
                                                }
                                              });
      std::cout << "trained " << outcome.epochs_completed << " epochs; checkpoint "
                << outcome.final_checkpoint.string() << '\n';
    } else if (*inf) {
      torch::manual_seed(inf_seed);
      auto model = train::load_model(nets::load_checkpoint(resolve_checkpoint(inf_ckpt)));
      std::optional<fs::path> debug;
      if (!inf_debug.empty()) debug = inf_debug;
      if (!inf_data.empty()) {
        std::int64_t passes = 0;
        for (const auto& id : data::list_ids(inf_data)) {
          const auto s = data::load_sample(inf_data, id);
          const auto r = infer(model, s.person, inf_self ? s.clothes_self : s.clothes_target,
                               s.descriptor, s.parse);
          passes += r.passes;
          write_inference(r, fs::path(inf_out) / (id + ".png"), debug);
        }
        std::cout << "generator passes: " << passes << '\n';
      } else {
        if (inf_person.empty() || inf_clothes.empty() || inf_desc.empty() || inf_parse.empty()) {
          throw InvalidArgument("infer needs --person, --clothes, --descriptor and --parse");
        }
        for (const auto& p : {inf_person, inf_clothes, inf_desc, inf_parse}) {
          if (!fs::exists(p)) throw NotFound("input not found: " + p);
        }
        const auto r = infer(model, read_png(inf_person), read_png(inf_clothes),
                             read_tensor(inf_desc).to(torch::kFloat32),
                             read_label_png(inf_parse).to(torch::kInt64));
        write_inference(r, inf_out, debug);
        std::cout << "generator passes: " << r.passes << '\n';
      }
    } else if (*ev) {
      torch::manual_seed(ev_seed);
      const auto report =
          metrics::evaluate_dirs(ev_pred, ev_ref, metrics::make_backend(ev_backend), ev_splits);
      std::cout << report.text();
      if (!ev_out.empty()) {
        std::ofstream out(ev_out, std::ios::trunc);
        if (!out) throw IoError("cannot write " + ev_out);
        out << report.csv();
      }
    } else if (*gr) {
      std::vector<std::array<torch::Tensor, 3>> cases;
      for (const auto& text : gr_cases) {
        const auto parts = split_commas(text);
        if (parts.size() != 3) {
          std::cerr << "--case expects three comma-separated paths, got '" << text << "'\n";
          return kExitUsage;
        }
        cases.push_back({read_png(parts[0]), read_png(parts[1]), read_png(parts[2])});
      }
      write_png(gr_out, compose_grid(cases));
    }
  } catch (const c10::Error& e) {
    std::cerr << "error: " << e.what_without_backtrace() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace dcton::cli
