#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "esmeta/experiment.hpp"

namespace esmeta {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void put_vector(std::string& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double x : v) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u(int width, const char* what) {
    if (bytes_.size() - pos_ < static_cast<std::size_t>(width)) {
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            std::string("checkpoint truncated reading ") + what);
    }
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += width;
    return v;
  }

  std::vector<double> vec(const char* what) {
    const std::uint64_t n = u(8, what);
    if (n > (bytes_.size() - pos_) / 8) {
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            std::string("checkpoint truncated reading ") + what);
    }
    std::vector<double> v(n);
    for (auto& x : v) x = std::bit_cast<double>(u(8, what));
    return v;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void validate(const Checkpoint& c) {
  auto invalid = [](const std::string& m) {
    return CheckpointError(CheckpointError::Kind::kInvalid, "invalid checkpoint: " + m);
  };
  if (c.obs_dim == 0 || c.action_dim == 0 || c.hidden == 0) throw invalid("zero layout dimension");
  const std::size_t na = c.actor_layout().total_params();
  const std::size_t nc = c.critic_layout().total_params();
  if (c.mu_a.size() != na || c.sigma_a.size() != na) throw invalid("actor vector length");
  if (c.mu_c.size() != nc || c.sigma_c.size() != nc) throw invalid("critic vector length");
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0 && std::isfinite(x); });
  };
  if (!finite(c.mu_a) || !finite(c.mu_c)) throw invalid("non-finite mean");
  if (!positive(c.sigma_a) || !positive(c.sigma_c)) throw invalid("sigma must be strictly positive");
}

}  // namespace

nn::NetLayout Checkpoint::actor_layout() const {
  return nn::build_actor_layout(obs_dim, action_dim, hidden);
}

nn::NetLayout Checkpoint::critic_layout() const {
  return nn::build_critic_layout(obs_dim, action_dim, hidden);
}

Checkpoint make_checkpoint(const MetaSnapshot& snapshot, std::uint64_t iteration,
                           std::uint64_t master_seed) {
  const nn::NetLayout& actor = snapshot.actor.layout();
  Checkpoint c;
  c.obs_dim = actor.input_dim();
  c.action_dim = actor.output_dim();
  c.hidden = actor.layers().front().output_dim;
  c.iteration = iteration;
  c.master_seed = master_seed;
  const auto copy = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  c.mu_a = copy(snapshot.actor.mu().values());
  c.sigma_a = copy(snapshot.actor.sigma());
  c.mu_c = copy(snapshot.critic.mu().values());
  c.sigma_c = copy(snapshot.critic.sigma());
  validate(c);
  return c;
}

MetaSnapshot snapshot_from_checkpoint(const Checkpoint& ckpt, SigmaBounds bounds) {
  validate(ckpt);
  for (const auto* v : {&ckpt.sigma_a, &ckpt.sigma_c}) {
    bounds.min = std::min(bounds.min, *std::min_element(v->begin(), v->end()));
    bounds.max = std::max(bounds.max, *std::max_element(v->begin(), v->end()));
  }
  auto actor_layout = std::make_shared<const nn::NetLayout>(ckpt.actor_layout());
  auto critic_layout = std::make_shared<const nn::NetLayout>(ckpt.critic_layout());
  return {GaussianParamDist(nn::FlatParams(actor_layout, ckpt.mu_a), ckpt.sigma_a, bounds),
          GaussianParamDist(nn::FlatParams(critic_layout, ckpt.mu_c), ckpt.sigma_c, bounds)};
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  validate(ckpt);
  std::string out(kCheckpointMagic, 4);
  put_u32(out, ckpt.format_version);
  put_u64(out, ckpt.obs_dim);
  put_u64(out, ckpt.action_dim);
  put_u64(out, ckpt.hidden);
  put_u64(out, ckpt.iteration);
  put_u64(out, ckpt.master_seed);
  put_vector(out, ckpt.mu_a);
  put_vector(out, ckpt.sigma_a);
  put_vector(out, ckpt.mu_c);
  put_vector(out, ckpt.sigma_c);
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4) throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint truncated reading magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "bad magic");
  }
  Reader r(bytes.substr(4));
  Checkpoint c;
  c.format_version = static_cast<std::uint32_t>(r.u(4, "version"));
  if (c.format_version == 0 || c.format_version > kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kUnsupportedVersion,
                          "unsupported checkpoint version " + std::to_string(c.format_version));
  }
  c.obs_dim = r.u(8, "header");
  c.action_dim = r.u(8, "header");
  c.hidden = r.u(8, "header");
  c.iteration = r.u(8, "header");
  c.master_seed = r.u(8, "header");
  c.mu_a = r.vec("mu_a");
  c.sigma_a = r.vec("sigma_a");
  c.mu_c = r.vec("mu_c");
  c.sigma_c = r.vec("sigma_c");
  if (!r.at_end()) throw CheckpointError(CheckpointError::Kind::kInvalid, "trailing bytes after checkpoint");
  validate(c);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace esmeta
