#include "bet/data.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "bet/errors.hpp"

namespace bet {

namespace {

constexpr char kMagic[4] = {'B', 'E', 'T', 'D'};
constexpr std::uint32_t kVersion = 1;

// All container I/O is little-endian; this code assumes a little-endian host.
static_assert(std::endian::native == std::endian::little, "BETD container assumes little-endian host");

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw FormatError("cannot open '" + path + "'", 0);
    }

    std::uint32_t u32(const char* what) {
        std::uint32_t v = 0;
        read(&v, sizeof(v), what);
        return v;
    }

    void floats(float* dst, std::size_t count, const char* what) {
        read(dst, count * sizeof(float), what);
    }

    std::uint64_t offset() const { return offset_; }

private:
    void read(void* dst, std::size_t bytes, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in_.gcount()) != bytes) {
            throw FormatError("'" + path_ + "': truncated while reading " + what, offset_);
        }
        offset_ += bytes;
    }

    std::ifstream in_;
    std::string path_;
    std::uint64_t offset_ = 0;
};

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw FormatError("cannot open '" + path + "' for writing", 0);
    }

    void u32(std::uint32_t v) { write(&v, sizeof(v)); }
    void bytes(const void* src, std::size_t count) { write(src, count); }
    void floats(const float* src, std::size_t count) { write(src, count * sizeof(float)); }

    void close() {
        out_.flush();
        if (!out_) throw FormatError("write failure on '" + path_ + "'", 0);
    }

private:
    void write(const void* src, std::size_t bytes) {
        out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(bytes));
    }

    std::ofstream out_;
    std::string path_;
};

}  // namespace

std::size_t count_windows(const TrajectoryDataset& ds, int h) {
    std::size_t n = 0;
    for (const auto& t : ds.trajectories) {
        if (t.length >= h) n += static_cast<std::size_t>(t.length - h + 1);
    }
    return n;
}

WindowBatch sample_windows(const TrajectoryDataset& ds, int h, int batch_size, Rng& rng) {
    if (h < 1) throw InputError("sample_windows: h must be >= 1");
    if (batch_size < 1) throw InputError("sample_windows: batch_size must be >= 1");
    const std::size_t total = count_windows(ds, h);
    if (total == 0) {
        throw InputError("sample_windows: no trajectory of length >= " + std::to_string(h));
    }

    WindowBatch batch;
    batch.batch = batch_size;
    batch.h = h;
    batch.obs_dim = ds.obs_dim;
    batch.act_dim = ds.act_dim;
    batch.obs.resize(static_cast<std::size_t>(batch_size) * h * ds.obs_dim);
    batch.act.resize(static_cast<std::size_t>(batch_size) * h * ds.act_dim);

    for (int b = 0; b < batch_size; ++b) {
        std::size_t pick = rng.uniform_int(total);
        const Trajectory* traj = nullptr;
        int start = 0;
        for (const auto& t : ds.trajectories) {
            if (t.length < h) continue;
            const std::size_t starts = static_cast<std::size_t>(t.length - h + 1);
            if (pick < starts) {
                traj = &t;
                start = static_cast<int>(pick);
                break;
            }
            pick -= starts;
        }
        std::memcpy(batch.obs.data() + static_cast<std::size_t>(b) * h * ds.obs_dim,
                    traj->obs.data() + static_cast<std::size_t>(start) * ds.obs_dim,
                    static_cast<std::size_t>(h) * ds.obs_dim * sizeof(double));
        std::memcpy(batch.act.data() + static_cast<std::size_t>(b) * h * ds.act_dim,
                    traj->act.data() + static_cast<std::size_t>(start) * ds.act_dim,
                    static_cast<std::size_t>(h) * ds.act_dim * sizeof(double));
    }
    return batch;
}

WindowBatch sample_windows(const TrajectoryDataset& ds, int h, int batch_size, std::uint64_t seed) {
    Rng rng(seed);
    return sample_windows(ds, h, batch_size, rng);
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
    Writer out(path);
    out.bytes(kMagic, 4);
    out.u32(kVersion);
    out.u32(static_cast<std::uint32_t>(ds.obs_dim));
    out.u32(static_cast<std::uint32_t>(ds.act_dim));
    out.u32(static_cast<std::uint32_t>(ds.trajectories.size()));
    std::vector<float> buf;
    for (const auto& t : ds.trajectories) {
        out.u32(static_cast<std::uint32_t>(t.length));
        buf.resize(t.obs.size());
        for (std::size_t i = 0; i < t.obs.size(); ++i) buf[i] = static_cast<float>(t.obs[i]);
        out.floats(buf.data(), buf.size());
        buf.resize(t.act.size());
        for (std::size_t i = 0; i < t.act.size(); ++i) buf[i] = static_cast<float>(t.act[i]);
        out.floats(buf.data(), buf.size());
    }
    out.close();
}

TrajectoryDataset load_dataset(const std::string& path) {
    Reader in(path);
    char magic[4];
    const std::uint32_t m = in.u32("magic");
    std::memcpy(magic, &m, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("'" + path + "': bad magic, not a BETD file", 0);
    }
    const std::uint32_t version = in.u32("version");
    if (version != kVersion) {
        throw FormatError("'" + path + "': unsupported BETD version " + std::to_string(version), 4);
    }
    TrajectoryDataset ds;
    ds.obs_dim = static_cast<int>(in.u32("obs_dim"));
    ds.act_dim = static_cast<int>(in.u32("act_dim"));
    if (ds.obs_dim <= 0 || ds.act_dim <= 0) {
        throw FormatError("'" + path + "': non-positive dims", 8);
    }
    const std::uint32_t n_traj = in.u32("trajectory count");
    ds.trajectories.resize(n_traj);
    std::vector<float> buf;
    for (std::uint32_t i = 0; i < n_traj; ++i) {
        Trajectory& t = ds.trajectories[i];
        t.length = static_cast<int>(in.u32("trajectory length"));
        if (t.length < 1) {
            throw FormatError("'" + path + "': trajectory length must be >= 1", in.offset() - 4);
        }
        buf.resize(static_cast<std::size_t>(t.length) * ds.obs_dim);
        in.floats(buf.data(), buf.size(), "observations");
        t.obs.assign(buf.begin(), buf.end());
        buf.resize(static_cast<std::size_t>(t.length) * ds.act_dim);
        in.floats(buf.data(), buf.size(), "actions");
        t.act.assign(buf.begin(), buf.end());
    }
    return ds;
}

void write_dataset_csv(const TrajectoryDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing", 0);
    out << "traj_id,step";
    for (int c = 0; c < ds.obs_dim; ++c) out << ",obs_" << c;
    for (int c = 0; c < ds.act_dim; ++c) out << ",act_" << c;
    out << "\n";
    char num[64];
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        const Trajectory& t = ds.trajectories[i];
        for (int s = 0; s < t.length; ++s) {
            out << i << "," << s;
            for (int c = 0; c < ds.obs_dim; ++c) {
                std::snprintf(num, sizeof(num), "%.17g", t.obs[static_cast<std::size_t>(s) * ds.obs_dim + c]);
                out << "," << num;
            }
            for (int c = 0; c < ds.act_dim; ++c) {
                std::snprintf(num, sizeof(num), "%.17g", t.act[static_cast<std::size_t>(s) * ds.act_dim + c]);
                out << "," << num;
            }
            out << "\n";
        }
    }
}

}  // namespace bet
