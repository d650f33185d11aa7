#include "atlas/map_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <zlib.h>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

// Little-endian record writer: payload accumulated, then emitted behind a
// 64-bit length prefix.
class RecordWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const std::vector<std::uint8_t>& b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void pose(const RigidTransform& T) {
    const auto& q = T.rotation();
    f64(q.w());
    f64(q.x());
    f64(q.y());
    f64(q.z());
    f64(T.translation().x());
    f64(T.translation().y());
    f64(T.translation().z());
  }

  void flush(std::ostream& out) {
    const std::uint64_t len = buf_.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

class RecordReader {
 public:
  RecordReader(const std::vector<std::uint8_t>& blob, const std::string& name)
      : blob_(blob), name_(name) {}

  bool next_record() {
    if (pos_ == blob_.size()) {
      return false;
    }
    std::uint64_t len;
    raw(&len, 8, /*whole_blob=*/true);
    record_end_ = pos_ + len;
    if (record_end_ > blob_.size()) {
      throw CorruptBlob(name_ + ": record length exceeds blob size");
    }
    return true;
  }

  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    if (pos_ + n > record_end_) {
      throw CorruptBlob(name_ + ": truncated record");
    }
    std::vector<std::uint8_t> out(blob_.begin() + pos_, blob_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  RigidTransform pose() {
    const double qw = f64(), qx = f64(), qy = f64(), qz = f64();
    const double tx = f64(), ty = f64(), tz = f64();
    return RigidTransform::from_normalized(Eigen::Quaterniond(qw, qx, qy, qz),
                                           Eigen::Vector3d(tx, ty, tz));
  }

 private:
  void raw(void* p, std::size_t n, bool whole_blob = false) {
    const std::size_t end = whole_blob ? blob_.size() : record_end_;
    if (pos_ + n > end) {
      throw CorruptBlob(name_ + ": truncated record");
    }
    std::memcpy(p, blob_.data() + pos_, n);
    pos_ += n;
  }
  const std::vector<std::uint8_t>& blob_;
  std::string name_;
  std::size_t pos_ = 0;
  std::size_t record_end_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot read " + file.string());
  }
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

std::uint32_t crc32_bytes(const std::vector<std::uint8_t>& data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

void write_pose_text(std::ostream& out, const RigidTransform& T) {
  const auto& q = T.rotation();
  const auto& t = T.translation();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z());
  out << buf;
}

}  // namespace

std::uint32_t crc32_file(const std::filesystem::path& file) {
  return crc32_bytes(read_file(file));
}

void save_map(const Map& map, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoFailure("cannot create map directory " + dir.string());
  }

  RecordWriter w;
  {
    std::ofstream out(dir / "vertices.bin", std::ios::binary | std::ios::trunc);
    std::ofstream dout(dir / "descriptors.bin", std::ios::binary | std::ios::trunc);
    RecordWriter dw;
    for (const auto& [id, v] : map.vertices()) {
      w.u64(v.id);
      w.u64(v.mission_id);
      w.f64(v.timestamp);
      w.pose(v.T_mission_body);
      w.u32(static_cast<std::uint32_t>(v.frames.size()));
      for (const VisualFrame& f : v.frames) {
        w.u32(static_cast<std::uint32_t>(f.keypoints.size()));
        for (std::size_t k = 0; k < f.keypoints.size(); ++k) {
          w.f64(f.keypoints[k].uv.x());
          w.f64(f.keypoints[k].uv.y());
          w.f64(f.keypoints[k].sigma_px);
          w.u64(f.landmark_refs[k]);
        }
        // Descriptors in a parallel blob, one record per frame, bit-packed
        // row-major.
        dw.u32(static_cast<std::uint32_t>(f.descriptors.size()));
        for (const BinaryDescriptor& d : f.descriptors) {
          dw.bytes(d.bytes());
        }
        dw.flush(dout);
      }
      w.flush(out);
    }
    if (!out || !dout) {
      throw IoFailure("write failed in " + dir.string());
    }
  }
  {
    std::ofstream out(dir / "edges.bin", std::ios::binary | std::ios::trunc);
    for (const auto& [from, e] : map.edges()) {
      w.u64(e.from_vertex);
      w.u64(e.to_vertex);
      w.pose(e.T_from_to);
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
          w.f64(e.covariance(r, c));
        }
      }
      w.flush(out);
    }
    if (!out) {
      throw IoFailure("write failed in " + dir.string());
    }
  }
  {
    std::ofstream out(dir / "landmarks.bin", std::ios::binary | std::ios::trunc);
    for (const auto& [id, l] : map.landmarks()) {
      w.u64(l.id);
      w.u64(l.host_vertex_id);
      w.f64(l.p_mission.x());
      w.f64(l.p_mission.y());
      w.f64(l.p_mission.z());
      w.u8(static_cast<std::uint8_t>(l.quality));
      w.u32(static_cast<std::uint32_t>(l.backlinks.size()));
      for (const Backlink& b : l.backlinks) {
        w.u64(b.vertex_id);
        w.u32(static_cast<std::uint32_t>(b.frame_idx));
        w.u32(static_cast<std::uint32_t>(b.keypoint_idx));
      }
      w.flush(out);
    }
    if (!out) {
      throw IoFailure("write failed in " + dir.string());
    }
  }

  std::ostringstream manifest;
  manifest << "format_version " << kMapFormatVersion << '\n';
  manifest << "descriptor_bits " << map.descriptor_bits() << '\n';
  manifest << "num_missions " << map.missions().size() << '\n';
  manifest << "num_vertices " << map.vertices().size() << '\n';
  manifest << "num_edges " << map.edges().size() << '\n';
  manifest << "num_landmarks " << map.landmarks().size() << '\n';
  manifest << "next_ids " << map.next_mission_id() << ' ' << map.next_vertex_id()
           << ' ' << map.next_landmark_id() << '\n';
  for (const PinholeCamera& cam : map.cameras()) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "camera %.17g %.17g %.17g %.17g ", cam.fx,
                  cam.fy, cam.cx, cam.cy);
    manifest << buf;
    write_pose_text(manifest, cam.T_body_camera);
    manifest << '\n';
  }
  for (const auto& [id, m] : map.missions()) {
    manifest << "mission " << m.id << ' ' << (m.anchored ? 1 : 0) << ' ';
    write_pose_text(manifest, m.T_global_mission);
    manifest << '\n';
  }
  for (const char* blob :
       {"vertices.bin", "edges.bin", "landmarks.bin", "descriptors.bin"}) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "checksum %s %08x\n", blob,
                  crc32_file(dir / blob));
    manifest << buf;
  }
  if (std::filesystem::exists(dir / "index.bin")) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "checksum index.bin %08x\n",
                  crc32_file(dir / "index.bin"));
    manifest << buf;
  }
  std::ofstream mout(dir / "manifest", std::ios::trunc);
  if (!mout) {
    throw IoFailure("cannot write manifest in " + dir.string());
  }
  mout << manifest.str();
}

void save_map_atomic(const Map& map, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  const fs::path old = dir.string() + ".old";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::remove_all(old, ec);
  fs::create_directories(tmp, ec);
  if (ec) {
    throw IoFailure("cannot stage map directory " + tmp.string());
  }
  if (fs::exists(dir / "index.bin")) {
    fs::copy_file(dir / "index.bin", tmp / "index.bin", ec);
  }
  save_map(map, tmp);
  if (fs::exists(dir)) {
    fs::rename(dir, old, ec);
    if (ec) {
      throw IoFailure("cannot move aside " + dir.string());
    }
  }
  fs::rename(tmp, dir, ec);
  if (ec) {
    throw IoFailure("cannot move staged map into " + dir.string());
  }
  fs::remove_all(old, ec);
}

namespace {

struct Manifest {
  int format_version = -1;
  int descriptor_bits = 0;
  std::size_t num_missions = 0, num_vertices = 0, num_edges = 0, num_landmarks = 0;
  std::uint64_t next_mission = 0, next_vertex = 0, next_landmark = 0;
  std::vector<PinholeCamera> cameras;
  std::vector<Mission> missions;
  std::map<std::string, std::uint32_t> checksums;
};

Manifest parse_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest");
  if (!in) {
    throw IoFailure("cannot read manifest in " + dir.string());
  }
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) {
      continue;
    }
    if (key == "format_version") {
      ss >> m.format_version;
    } else if (key == "descriptor_bits") {
      ss >> m.descriptor_bits;
    } else if (key == "num_missions") {
      ss >> m.num_missions;
    } else if (key == "num_vertices") {
      ss >> m.num_vertices;
    } else if (key == "num_edges") {
      ss >> m.num_edges;
    } else if (key == "num_landmarks") {
      ss >> m.num_landmarks;
    } else if (key == "next_ids") {
      ss >> m.next_mission >> m.next_vertex >> m.next_landmark;
    } else if (key == "camera") {
      PinholeCamera cam;
      double qw, qx, qy, qz, tx, ty, tz;
      ss >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> qw >> qx >> qy >> qz >> tx >>
          ty >> tz;
      cam.T_body_camera = RigidTransform::from_normalized(
          Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz));
      m.cameras.push_back(cam);
    } else if (key == "mission") {
      Mission mission;
      int anchored;
      double qw, qx, qy, qz, tx, ty, tz;
      ss >> mission.id >> anchored >> qw >> qx >> qy >> qz >> tx >> ty >> tz;
      mission.anchored = anchored != 0;
      mission.T_global_mission = RigidTransform::from_normalized(
          Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz));
      m.missions.push_back(std::move(mission));
    } else if (key == "checksum") {
      std::string blob, hex;
      ss >> blob >> hex;
      m.checksums[blob] = static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
    }
  }
  if (m.format_version != kMapFormatVersion) {
    throw UnsupportedVersion("map format version " +
                             std::to_string(m.format_version) + " not supported");
  }
  return m;
}

std::vector<std::uint8_t> read_checked_blob(const std::filesystem::path& dir,
                                            const Manifest& m, const std::string& name) {
  auto blob = read_file(dir / name);
  auto it = m.checksums.find(name);
  if (it == m.checksums.end()) {
    throw CorruptBlob("manifest has no checksum for " + name);
  }
  if (crc32_bytes(blob) != it->second) {
    throw CorruptBlob("checksum mismatch for " + name);
  }
  return blob;
}

}  // namespace

Map load_map(const std::filesystem::path& dir) {
  const Manifest manifest = parse_manifest(dir);

  Map map;
  map.set_descriptor_bits(manifest.descriptor_bits);
  map.set_cameras(manifest.cameras);
  for (Mission m : manifest.missions) {
    map.insert_mission(std::move(m));  // vertex_ids filled below
  }

  const auto vblob = read_checked_blob(dir, manifest, "vertices.bin");
  const auto dblob = read_checked_blob(dir, manifest, "descriptors.bin");
  const auto eblob = read_checked_blob(dir, manifest, "edges.bin");
  const auto lblob = read_checked_blob(dir, manifest, "landmarks.bin");

  const std::size_t row_bytes = (manifest.descriptor_bits + 7) / 8;
  RecordReader vr(vblob, "vertices.bin");
  RecordReader dr(dblob, "descriptors.bin");
  std::size_t vertex_count = 0;
  while (vr.next_record()) {
    Vertex v;
    v.id = vr.u64();
    v.mission_id = vr.u64();
    v.timestamp = vr.f64();
    v.T_mission_body = vr.pose();
    const std::uint32_t num_frames = vr.u32();
    v.frames.resize(num_frames);
    for (std::uint32_t f = 0; f < num_frames; ++f) {
      const std::uint32_t num_kp = vr.u32();
      VisualFrame& frame = v.frames[f];
      frame.keypoints.resize(num_kp);
      frame.landmark_refs.resize(num_kp);
      for (std::uint32_t k = 0; k < num_kp; ++k) {
        frame.keypoints[k].uv.x() = vr.f64();
        frame.keypoints[k].uv.y() = vr.f64();
        frame.keypoints[k].sigma_px = vr.f64();
        frame.landmark_refs[k] = vr.u64();
      }
      if (!dr.next_record()) {
        throw CorruptBlob("descriptors.bin: missing record for vertex frame");
      }
      const std::uint32_t num_desc = dr.u32();
      if (num_desc != num_kp) {
        throw CorruptBlob("descriptors.bin: descriptor count mismatch");
      }
      frame.descriptors.reserve(num_desc);
      for (std::uint32_t k = 0; k < num_desc; ++k) {
        frame.descriptors.emplace_back(manifest.descriptor_bits, dr.bytes(row_bytes));
      }
    }
    map.insert_vertex(std::move(v));
    ++vertex_count;
  }
  if (vertex_count != manifest.num_vertices) {
    throw CorruptBlob("vertices.bin: record count mismatch");
  }

  RecordReader er(eblob, "edges.bin");
  std::size_t edge_count = 0;
  while (er.next_record()) {
    OdometryEdge e;
    e.from_vertex = er.u64();
    e.to_vertex = er.u64();
    e.T_from_to = er.pose();
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) {
        e.covariance(r, c) = er.f64();
      }
    }
    map.add_edge(e);
    ++edge_count;
  }
  if (edge_count != manifest.num_edges) {
    throw CorruptBlob("edges.bin: record count mismatch");
  }

  RecordReader lr(lblob, "landmarks.bin");
  std::size_t landmark_count = 0;
  while (lr.next_record()) {
    Landmark l;
    l.id = lr.u64();
    l.host_vertex_id = lr.u64();
    l.p_mission.x() = lr.f64();
    l.p_mission.y() = lr.f64();
    l.p_mission.z() = lr.f64();
    l.quality = static_cast<LandmarkQuality>(lr.u8());
    const std::uint32_t n = lr.u32();
    l.backlinks.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      l.backlinks[i].vertex_id = lr.u64();
      l.backlinks[i].frame_idx = static_cast<int>(lr.u32());
      l.backlinks[i].keypoint_idx = static_cast<int>(lr.u32());
    }
    map.insert_landmark(std::move(l));
    ++landmark_count;
  }
  if (landmark_count != manifest.num_landmarks) {
    throw CorruptBlob("landmarks.bin: record count mismatch");
  }

  // Rebuild mission vertex chains in timestamp order.
  struct ChainEntry {
    double ts;
    VertexId id;
  };
  std::map<MissionId, std::vector<ChainEntry>> chains;
  for (const auto& [id, v] : map.vertices()) {
    chains[v.mission_id].push_back({v.timestamp, id});
  }
  for (auto& [mid, chain] : chains) {
    std::sort(chain.begin(), chain.end(),
              [](const ChainEntry& a, const ChainEntry& b) { return a.ts < b.ts; });
    Mission m = map.mission(mid);
    m.vertex_ids.clear();
    for (const ChainEntry& e : chain) {
      m.vertex_ids.push_back(e.id);
    }
    map.insert_mission(std::move(m));
  }

  map.set_next_ids(manifest.next_mission, manifest.next_vertex, manifest.next_landmark);
  return map;
}

void update_manifest_checksum(const std::filesystem::path& dir,
                              const std::string& blob_name) {
  const std::uint32_t crc = crc32_file(dir / blob_name);
  std::ifstream in(dir / "manifest");
  if (!in) {
    throw IoFailure("cannot read manifest in " + dir.string());
  }
  std::ostringstream rewritten;
  std::string line;
  bool found = false;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checksum %s %08x", blob_name.c_str(), crc);
  while (std::getline(in, line)) {
    if (line.rfind("checksum " + blob_name + " ", 0) == 0) {
      rewritten << buf << '\n';
      found = true;
    } else {
      rewritten << line << '\n';
    }
  }
  if (!found) {
    rewritten << buf << '\n';
  }
  in.close();
  std::ofstream out(dir / "manifest", std::ios::trunc);
  out << rewritten.str();
}

bool manifest_checksum(const std::filesystem::path& dir, const std::string& blob_name,
                       std::uint32_t* out) {
  std::ifstream in(dir / "manifest");
  if (!in) {
    return false;
  }
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key, blob, hex;
    if ((ss >> key >> blob >> hex) && key == "checksum" && blob == blob_name) {
      *out = static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
      return true;
    }
  }
  return false;
}

}  // namespace atlas
