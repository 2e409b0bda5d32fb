#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbc/dataset.hpp"
#include "rbc/errors.hpp"
#include "rbc/grid.hpp"

namespace rbc {

// RBCE episode file, little-endian:
//   magic "RBCE", version u32 = 1, ny u32, nx u32, n_snapshots u32,
//   reserved u32 = 0, ra f64, pr f64, t_first f64, dt_record f64, seed u64,
// then n_snapshots * ny * nx IEEE-754 binary32 values, snapshot-major,
// row-major within a snapshot (y outer, x inner). A sidecar
// "<name>.manifest.json" duplicates the header in text.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline bool get_bytes(std::istream& is, unsigned char* b, int n) {
  is.read(reinterpret_cast<char*>(b), n);
  return is.gcount() == n;
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) return false;
  v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!get_bytes(is, b, 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

inline bool get_f64(std::istream& is, double& v) {
  std::uint64_t bits;
  if (!get_u64(is, bits)) return false;
  std::memcpy(&v, &bits, 8);
  return true;
}

inline bool get_f32(std::istream& is, float& v) {
  std::uint32_t bits;
  if (!get_u32(is, bits)) return false;
  std::memcpy(&v, &bits, 4);
  return true;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& episode_path) {
  std::filesystem::path p = episode_path;
  p.replace_extension();
  p += ".manifest.json";
  return p;
}

}  // namespace detail

inline void write_episode(const Episode& episode, const std::filesystem::path& path) {
  const int n = episode.snapshot_count();
  if (n < 1) throw std::invalid_argument("write_episode: empty episode");
  const Grid& g = episode.grid();
  for (const ScalarField& f : episode.snapshots)
    if (!(f.grid == g)) throw std::invalid_argument("write_episode: snapshots on mixed grids");
  if (static_cast<int>(episode.times.size()) != n)
    throw std::invalid_argument("write_episode: times/snapshots length mismatch");
  const double dt_record = n > 1 ? episode.times[1] - episode.times[0] : 0.0;
  for (int i = 1; i < n; ++i) {
    const double gap = episode.times[i] - episode.times[i - 1];
    if (!(gap > 0.0) || std::abs(gap - dt_record) > 1e-9 * std::max(1.0, std::abs(dt_record)))
      throw std::invalid_argument("write_episode: times not strictly increasing with constant spacing");
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("write_episode: cannot open " + path.string());
  os.write("RBCE", 4);
  detail::put_u32(os, 1u);
  detail::put_u32(os, static_cast<std::uint32_t>(g.ny));
  detail::put_u32(os, static_cast<std::uint32_t>(g.nx));
  detail::put_u32(os, static_cast<std::uint32_t>(n));
  detail::put_u32(os, 0u);
  detail::put_f64(os, episode.ra);
  detail::put_f64(os, episode.pr);
  detail::put_f64(os, episode.times[0]);
  detail::put_f64(os, dt_record);
  detail::put_u64(os, episode.seed);
  for (const ScalarField& f : episode.snapshots)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        detail::put_f32(os, static_cast<float>(f.values(j, i)));
  if (!os) throw IoError("write_episode: write failed for " + path.string());
  os.close();

  nlohmann::json m;
  m["format"] = "RBCE";
  m["version"] = 1;
  m["ra"] = episode.ra;
  m["pr"] = episode.pr;
  m["seed"] = episode.seed;
  m["grid"] = {{"ny", g.ny}, {"nx", g.nx}};
  m["times"] = {{"first", episode.times[0]}, {"interval", dt_record}, {"count", n}};
  std::ofstream ms(detail::manifest_path(path), std::ios::trunc);
  if (!ms) throw IoError("write_episode: cannot open manifest for " + path.string());
  ms << m.dump(2) << "\n";
  if (!ms) throw IoError("write_episode: manifest write failed for " + path.string());
}

inline Episode read_episode(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_episode: cannot open " + path.string());

  char magic[4];
  if (!detail::get_bytes(is, reinterpret_cast<unsigned char*>(magic), 4))
    throw FormatError("read_episode: truncated header in " + path.string());
  if (std::memcmp(magic, "RBCE", 4) != 0)
    throw FormatError("read_episode: bad magic in " + path.string());

  std::uint32_t version, ny, nx, n_snapshots, reserved;
  double ra, pr, t_first, dt_record;
  std::uint64_t seed;
  if (!detail::get_u32(is, version) || !detail::get_u32(is, ny) ||
      !detail::get_u32(is, nx) || !detail::get_u32(is, n_snapshots) ||
      !detail::get_u32(is, reserved) || !detail::get_f64(is, ra) ||
      !detail::get_f64(is, pr) || !detail::get_f64(is, t_first) ||
      !detail::get_f64(is, dt_record) || !detail::get_u64(is, seed))
    throw FormatError("read_episode: truncated header in " + path.string());
  if (version != 1)
    throw FormatError("read_episode: unsupported version " + std::to_string(version));
  if (ny < 2 || nx < 2 || nx % 2 != 0 || n_snapshots < 1)
    throw FormatError("read_episode: implausible header dims in " + path.string());

  Grid grid(static_cast<int>(nx), static_cast<int>(ny));
  Episode ep;
  ep.ra = ra;
  ep.pr = pr;
  ep.seed = seed;
  ep.snapshots.reserve(n_snapshots);
  for (std::uint32_t s = 0; s < n_snapshots; ++s) {
    ScalarField f(grid);
    for (std::uint32_t j = 0; j < ny; ++j)
      for (std::uint32_t i = 0; i < nx; ++i) {
        float v;
        if (!detail::get_f32(is, v))
          throw FormatError("read_episode: truncated data in " + path.string());
        f.values(j, i) = v;
      }
    ep.snapshots.push_back(std::move(f));
    ep.times.push_back(t_first + static_cast<double>(s) * dt_record);
  }
  is.peek();
  if (!is.eof())
    throw FormatError("read_episode: trailing bytes in " + path.string());

  const auto mpath = detail::manifest_path(path);
  if (std::filesystem::exists(mpath)) {
    std::ifstream ms(mpath);
    if (!ms) throw IoError("read_episode: cannot open manifest " + mpath.string());
    nlohmann::json m;
    try {
      ms >> m;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("read_episode: unparseable manifest " + mpath.string() + ": " + e.what());
    }
    auto check = [&](const char* name, double header_value, double manifest_value) {
      if (manifest_value != header_value)
        throw FormatError(std::string("read_episode: manifest ") + name + " " +
                          std::to_string(manifest_value) + " != header " +
                          std::to_string(header_value) + " in " + path.string());
    };
    if (m.contains("ra")) check("ra", ra, m["ra"].get<double>());
    if (m.contains("pr")) check("pr", pr, m["pr"].get<double>());
    if (m.contains("seed")) check("seed", static_cast<double>(seed), static_cast<double>(m["seed"].get<std::uint64_t>()));
    if (m.contains("grid")) {
      check("ny", ny, m["grid"].value("ny", static_cast<double>(ny)));
      check("nx", nx, m["grid"].value("nx", static_cast<double>(nx)));
    }
    if (m.contains("times"))
      check("count", n_snapshots, m["times"].value("count", static_cast<double>(n_snapshots)));
  }
  return ep;
}

}  // namespace rbc
