#include "udainv/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

#include "udainv/error.hpp"

namespace udainv {

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t.tensor;
  throw FormatError("checkpoint: no tensor named '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return true;
  return false;
}

void Checkpoint::put(std::string name, Tensor t) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
    throw ValidationError("checkpoint: invalid tensor name '" + name + "'");
  if (has(name)) throw ValidationError("checkpoint: duplicate tensor name '" + name + "'");
  tensors.push_back({std::move(name), std::move(t)});
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ostringstream head;
  head << kCheckpointMagic << "\n";
  head << "config " << ckpt.config_text.size() << "\n" << ckpt.config_text;
  head << "tensors " << ckpt.tensors.size() << "\n";
  std::uint64_t offset = 0;
  for (const NamedTensor& t : ckpt.tensors) {
    head << t.name << " " << t.tensor.rank();
    for (auto d : t.tensor.shape()) head << " " << d;
    head << " " << offset << "\n";
    offset += 8 * t.tensor.size();
  }
  head << "payload " << offset << "\n";

  std::string payload;
  payload.reserve(offset);
  for (const NamedTensor& t : ckpt.tensors)
    for (double v : t.tensor.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  const std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

namespace {

std::string read_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: truncated before " + what);
  return line;
}

std::uint64_t parse_count(const std::string& line, const std::string& key) {
  std::istringstream ss(line);
  std::string k;
  std::uint64_t n = 0;
  if (!(ss >> k >> n) || k != key) throw FormatError("checkpoint: expected '" + key + " <n>', got '" + line + "'");
  return n;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  if (read_line(in, "magic") != kCheckpointMagic)
    throw FormatError("checkpoint: bad magic in " + path.string() + " (expected UDAINV1)");

  Checkpoint ckpt;
  const std::uint64_t config_len = parse_count(read_line(in, "config"), "config");
  ckpt.config_text.resize(config_len);
  in.read(ckpt.config_text.data(), static_cast<std::streamsize>(config_len));
  if (static_cast<std::uint64_t>(in.gcount()) != config_len)
    throw FormatError("checkpoint: truncated config text");

  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset;
  };
  const std::uint64_t count = parse_count(read_line(in, "tensor directory"), "tensors");
  std::vector<Entry> dir;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string line = read_line(in, "tensor directory entry");
    std::istringstream ss(line);
    Entry e;
    std::size_t rank = 0;
    if (!(ss >> e.name >> rank) || rank < 1 || rank > 2)
      throw FormatError("checkpoint: bad directory entry '" + line + "'");
    e.shape.resize(rank);
    for (auto& d : e.shape)
      if (!(ss >> d) || d == 0) throw FormatError("checkpoint: bad shape in entry '" + line + "'");
    if (!(ss >> e.offset)) throw FormatError("checkpoint: missing offset in entry '" + line + "'");
    dir.push_back(std::move(e));
  }
  const std::uint64_t payload_len = parse_count(read_line(in, "payload header"), "payload");

  std::uint64_t expected_offset = 0;
  for (const Entry& e : dir) {
    if (e.offset != expected_offset)
      throw FormatError("checkpoint: tensor '" + e.name + "' offset " + std::to_string(e.offset) +
                        " overlaps or leaves a gap (expected " + std::to_string(expected_offset) + ")");
    expected_offset += 8 * shape_product(e.shape);
  }
  if (expected_offset != payload_len)
    throw FormatError("checkpoint: directory describes " + std::to_string(expected_offset) +
                      " payload bytes but header declares " + std::to_string(payload_len));

  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != payload_len)
    throw FormatError("checkpoint: truncated payload, expected " + std::to_string(payload_len) +
                      " bytes, got " + std::to_string(payload.size()));

  for (const Entry& e : dir) {
    Tensor t(e.shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[e.offset + 8 * i + b])) << (8 * b);
      t[i] = std::bit_cast<double>(bits);
    }
    ckpt.put(e.name, std::move(t));
  }
  return ckpt;
}

}  // namespace udainv
