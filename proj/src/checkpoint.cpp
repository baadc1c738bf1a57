#include <fstream>
#include <sstream>

#include "dcton/errors.hpp"
#include "dcton/nets.hpp"
#include "dcton/tensor_file.hpp"

namespace dcton::nets {

namespace fs = std::filesystem;

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [key, value] : tensors) {
    if (key == name) return &value;
  }
  return nullptr;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  manifest << kCheckpointHeader << '\n';
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.empty() || name.find_first_of(" \t\n/") != std::string::npos) {
      throw InvalidArgument("checkpoint: invalid tensor name '" + name + "'");
    }
    manifest << name << ' ' << dtype_name(dtype_of(tensor)) << ' ';
    if (tensor.dim() == 0) manifest << '-';
    for (int64_t d = 0; d < tensor.dim(); ++d) manifest << (d ? "x" : "") << tensor.size(d);
    manifest << '\n';
    write_tensor(dir / (name + ".tns"), tensor);
  }
  std::ofstream config(dir / "config.txt", std::ios::trunc);
  for (const auto& [key, value] : ckpt.config) config << key << '=' << value << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw NotFound("checkpoint manifest not found in " + dir.string());
  std::string header;
  std::getline(manifest, header);
  if (header != kCheckpointHeader) {
    throw FormatError("checkpoint " + dir.string() + ": unsupported version header '" + header +
                      "'");
  }
  Checkpoint ckpt;
  for (std::string line; std::getline(manifest, line);) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, dtype, shape;
    if (!(fields >> name >> dtype >> shape)) {
      throw FormatError("checkpoint manifest: malformed line '" + line + "'");
    }
    auto tensor = read_tensor(dir / (name + ".tns"));
    if (dtype_name(dtype_of(tensor)) != dtype) {
      throw FormatError("checkpoint: dtype of " + name + " disagrees with manifest");
    }
    ckpt.tensors.emplace_back(name, tensor);
  }
  if (std::ifstream config(dir / "config.txt"); config) {
    for (std::string line; std::getline(config, line);) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  return ckpt;
}

void collect(const torch::nn::Module& module, const std::string& prefix, Checkpoint& out) {
  for (const auto& p : module.named_parameters(true)) {
    out.tensors.emplace_back(prefix + "." + p.key(), p.value().detach().clone());
  }
  for (const auto& b : module.named_buffers(true)) {
    out.tensors.emplace_back(prefix + "." + b.key(), b.value().detach().clone());
  }
}

void restore(torch::nn::Module& module, const std::string& prefix, const Checkpoint& ckpt) {
  torch::NoGradGuard no_grad;
  auto copy_into = [&](const std::string& key, torch::Tensor& target) {
    const auto name = prefix + "." + key;
    const auto* src = ckpt.find(name);
    if (!src) throw FormatError("checkpoint is missing tensor " + name);
    if (src->sizes() != target.sizes() || src->scalar_type() != target.scalar_type()) {
      throw FormatError("checkpoint tensor " + name + " has the wrong shape or dtype");
    }
    target.copy_(*src);
  };
  for (auto& p : module.named_parameters(true)) copy_into(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy_into(b.key(), b.value());
}

}  // namespace dcton::nets
