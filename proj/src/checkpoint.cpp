#include "auctionmatch/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "auctionmatch/errors.hpp"

namespace am {

namespace {

constexpr const char kMagic[] = "auctionmatch-checkpoint-v1";

std::size_t payload_count(const MechanismParams& params) {
  std::size_t total = 0;
  for (const Tensor* t : param_refs(params)) total += t->numel();
  return total + params.demand.n + 1;  // lambda per bidder, then rho
}

std::string read_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw CheckpointError(CheckpointError::Kind::truncated,
                          "checkpoint: unexpected end of header in " + path);
  return line;
}

std::uint64_t header_field(const std::string& line, const std::string& name,
                           const std::string& path) {
  std::istringstream ss(line);
  std::string word;
  std::uint64_t value = 0;
  if (!(ss >> word >> value) || word != name)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          "checkpoint: malformed header line '" + line + "' in " + path);
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const Config& config,
                     const MechanismParams& params, const TrainState& state) {
  if (state.lambda.size() != params.demand.n)
    throw ShapeError("save_checkpoint: one multiplier per bidder required");

  const std::string cfg_text = serialize_config(config);
  std::size_t cfg_lines = 0;
  for (char c : cfg_text)
    if (c == '\n') ++cfg_lines;

  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write " + tmp);

  out << kMagic << "\n";
  out << "batches-done " << state.batches_done << "\n";
  out << "config-lines " << cfg_lines << "\n" << cfg_text;
  out << "payload " << payload_count(params) << "\n";
  for (const Tensor* t : param_refs(params))
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->numel() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(state.lambda.data()),
            static_cast<std::streamsize>(state.lambda.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(&state.rho),
            static_cast<std::streamsize>(sizeof(double)));
  out.flush();
  if (!out) throw IoError("checkpoint: short write to " + tmp);
  out.close();
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("checkpoint: cannot move " + tmp + " into place");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);

  const std::string magic = read_line(in, path);
  if (magic != kMagic)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          "checkpoint: " + path + " is not a " + kMagic + " file");

  Checkpoint ck;
  ck.state.batches_done =
      static_cast<std::size_t>(header_field(read_line(in, path), "batches-done", path));
  const std::uint64_t cfg_lines = header_field(read_line(in, path), "config-lines", path);
  std::string cfg_text;
  for (std::uint64_t i = 0; i < cfg_lines; ++i) cfg_text += read_line(in, path) + "\n";
  ck.config = parse_config_text(cfg_text);

  ck.params = make_mechanism(demand_spec(ck.config), sinkhorn_options(ck.config),
                             ck.config.hidden, ck.config.seed);
  const std::uint64_t declared = header_field(read_line(in, path), "payload", path);
  const std::size_t expected = payload_count(ck.params);
  if (declared != expected)
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          "checkpoint: payload of " + std::to_string(declared) +
                              " doubles does not fit the embedded config (wants " +
                              std::to_string(expected) + ")");

  auto read_doubles = [&](double* dst, std::size_t count) {
    in.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
      throw CheckpointError(CheckpointError::Kind::truncated,
                            "checkpoint: payload of " + path + " ends early");
  };
  for (Tensor* t : param_refs(ck.params)) read_doubles(t->data(), t->numel());
  ck.state.lambda.assign(ck.params.demand.n, 0.0);
  read_doubles(ck.state.lambda.data(), ck.state.lambda.size());
  read_doubles(&ck.state.rho, 1);
  char extra = 0;
  if (in.read(&extra, 1), in.gcount() != 0)
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          "checkpoint: trailing bytes after payload in " + path);
  return ck;
}

}  // namespace am
