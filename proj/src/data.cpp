#include "dcton/data.hpp"

#include <algorithm>
#include <fstream>

#include "dcton/errors.hpp"
#include "dcton/image.hpp"
#include "dcton/tensor_file.hpp"

namespace dcton::data {

namespace fs = std::filesystem;

void check_image_size(int height, int width) {
  if (height < 32 || width < 32 || height % 16 != 0 || width % 16 != 0) {
    throw InvalidArgument("image size " + std::to_string(height) + "x" + std::to_string(width) +
                          " must be multiples of 16 and at least 32x32");
  }
}

void DatasetSpec::validate() const {
  if (count < 1) throw InvalidArgument("dataset count must be >= 1");
  check_image_size(height, width);
  if (clothes_styles < 2) throw InvalidArgument("need at least 2 clothes styles");
}

std::vector<std::string> generate_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::vector<std::string> ids;
  ids.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    auto sample = render_sample(spec, i);
    save_sample(out_dir, sample);
    ids.push_back(sample.id);
  }
  std::sort(ids.begin(), ids.end());
  std::ofstream manifest(out_dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest.txt").string());
  for (const auto& id : ids) manifest << id << '\n';
  return ids;
}

void save_sample(const fs::path& dir, const TryOnSample& s) {
  std::error_code ec;
  for (const char* sub : {"person", "clothes", "target", "parse", "descriptor", "warp"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  write_png(dir / "person" / (s.id + ".png"), s.person);
  write_png(dir / "clothes" / (s.id + ".png"), s.clothes_self);
  write_png(dir / "target" / (s.id + ".png"), s.clothes_target);
  write_label_png(dir / "parse" / (s.id + ".png"), s.parse);
  write_tensor(dir / "descriptor" / (s.id + ".tns"), s.descriptor.to(torch::kFloat32));
  if (s.warp_points.defined()) {
    write_tensor(dir / "warp" / (s.id + ".tns"), s.warp_points.to(torch::kFloat64));
  }
}

std::vector<std::string> list_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  if (std::ifstream manifest(dir / "manifest.txt"); manifest) {
    for (std::string line; std::getline(manifest, line);) {
      if (!line.empty()) ids.push_back(line);
    }
  } else {
    const auto person = dir / "person";
    if (!fs::is_directory(person)) throw NotFound("no person/ directory under " + dir.string());
    for (const auto& entry : fs::directory_iterator(person)) {
      if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

TryOnSample load_sample(const fs::path& dir, const std::string& id) {
  auto require = [&](const fs::path& p) {
    if (!fs::exists(p)) throw NotFound("missing file: " + p.string());
    return p;
  };
  TryOnSample s;
  s.id = id;
  s.person = read_png(require(dir / "person" / (id + ".png")));
  s.clothes_self = read_png(require(dir / "clothes" / (id + ".png")));
  s.clothes_target = read_png(require(dir / "target" / (id + ".png")));
  s.parse = read_label_png(require(dir / "parse" / (id + ".png")));
  s.descriptor = read_tensor(require(dir / "descriptor" / (id + ".tns"))).to(torch::kFloat32);
  if (const auto warp = dir / "warp" / (id + ".tns"); fs::exists(warp)) {
    s.warp_points = read_tensor(warp);
  }

  const auto h = s.person.size(1), w = s.person.size(2);
  auto same = [&](const torch::Tensor& t, int64_t channels, const char* what) {
    const bool ok = channels == 0 ? (t.dim() == 2 && t.size(0) == h && t.size(1) == w)
                                  : (t.dim() == 3 && t.size(0) == channels && t.size(1) == h &&
                                     t.size(2) == w);
    if (!ok) throw FormatError(std::string(what) + " of sample " + id + " has mismatched shape");
  };
  same(s.clothes_self, 3, "clothes");
  same(s.clothes_target, 3, "target clothes");
  same(s.parse, 0, "parse map");
  same(s.descriptor, kDescriptorChannels, "descriptor");
  if (s.parse.numel() > 0 && s.parse.max().item<int64_t>() >= kNumLabels) {
    throw FormatError("parse map of sample " + id + " has labels outside 0..3");
  }
  s.skin = extract_skin(s.person, s.parse);
  return s;
}

std::vector<TryOnSample> load_dataset(const fs::path& dir) {
  std::vector<TryOnSample> out;
  for (const auto& id : list_ids(dir)) out.push_back(load_sample(dir, id));
  return out;
}

torch::Tensor label_mask(const torch::Tensor& parse, Label label) {
  return (parse == static_cast<int64_t>(label)).to(torch::kFloat32).unsqueeze(-3);
}

torch::Tensor parse_masks(const torch::Tensor& parse) {
  std::vector<torch::Tensor> masks;
  for (int l = 0; l < kNumLabels; ++l) masks.push_back(label_mask(parse, static_cast<Label>(l)));
  return torch::cat(masks, -3);
}

torch::Tensor extract_skin(const torch::Tensor& person, const torch::Tensor& parse) {
  if (person.dim() < 3 || parse.dim() != person.dim() - 1 ||
      person.size(-1) != parse.size(-1) || person.size(-2) != parse.size(-2)) {
    throw InvalidArgument("extract_skin: person and parse sizes differ");
  }
  auto mask = label_mask(parse, kSkin).to(person.scalar_type());
  return person * mask + kPadding * (1 - mask);
}

}  // namespace dcton::data
