#pragma once

#include <splatstream/error.hpp>
#include <splatstream/gaussians.hpp>
#include <splatstream/ply.hpp>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace splatstream {

using Clock = std::chrono::steady_clock;

enum class ModelState { Unloaded, Loading, Loaded };

constexpr std::string_view to_string(ModelState s) {
  switch (s) {
    case ModelState::Unloaded: return "Unloaded";
    case ModelState::Loading: return "Loading";
    case ModelState::Loaded: return "Loaded";
  }
  return "Unknown";
}

struct ModelRecord {
  std::string id;
  std::string name;
  std::filesystem::path directory_path;
  std::filesystem::path ply_path;
  std::optional<std::filesystem::path> preview_path;
  ModelState state = ModelState::Unloaded;
  Clock::time_point last_access{};
  std::size_t ref_count = 0;
};

namespace detail {

inline std::optional<std::filesystem::path> find_model_ply(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto canonical = dir / "point_cloud.ply";
  std::error_code ec;
  if (fs::is_regular_file(canonical, ec)) return canonical;

  std::optional<fs::path> single;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file(ec) && it->path().extension() == ".ply") {
      if (single) return std::nullopt;  // ambiguous
      single = it->path();
    }
  }
  if (ec) throw std::filesystem::filesystem_error("cannot list model directory", dir, ec);
  return single;
}

}  // namespace detail

/// One record per `<root>/<id>/` that holds `point_cloud.ply` or exactly one
/// other `.ply`. Records come back Unloaded and sorted by id.
inline std::vector<ModelRecord> scan_model_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorKind::RootNotFound, root.string());
  }
  std::vector<ModelRecord> records;
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
    std::error_code dir_ec;
    if (!it->is_directory(dir_ec)) continue;
    try {
      auto ply = detail::find_model_ply(it->path());
      if (!ply) continue;
      ModelRecord rec;
      rec.id = it->path().filename().string();
      rec.name = rec.id;
      rec.directory_path = it->path();
      rec.ply_path = *ply;
      if (fs::is_regular_file(it->path() / "preview.jpg", dir_ec)) {
        rec.preview_path = it->path() / "preview.jpg";
      }
      records.push_back(std::move(rec));
    } catch (const fs::filesystem_error& e) {
      std::clog << "warning: skipping model directory " << it->path() << ": " << e.what() << "\n";
    }
  }
  if (ec) throw Error(ErrorKind::RootNotFound, root.string() + ": " + ec.message());
  std::sort(records.begin(), records.end(),
            [](const ModelRecord& a, const ModelRecord& b) { return a.id < b.id; });
  return records;
}

class ModelRegistry;

/// RAII reference to loaded primitives. Releases its reference on destruction.
class ModelHandle {
 public:
  ModelHandle() = default;
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;
  ModelHandle(ModelHandle&& o) noexcept
      : registry_(std::exchange(o.registry_, nullptr)), id_(std::move(o.id_)), prims_(std::move(o.prims_)) {}
  ModelHandle& operator=(ModelHandle&& o) noexcept {
    if (this != &o) {
      reset();
      registry_ = std::exchange(o.registry_, nullptr);
      id_ = std::move(o.id_);
      prims_ = std::move(o.prims_);
    }
    return *this;
  }
  ~ModelHandle() { reset(); }

  const ActivatedPrimitives& operator*() const { return *prims_; }
  const ActivatedPrimitives* operator->() const { return prims_.get(); }
  const std::string& id() const { return id_; }
  explicit operator bool() const { return prims_ != nullptr; }

  inline void reset();

 private:
  friend class ModelRegistry;
  ModelHandle(ModelRegistry* r, std::string id, std::shared_ptr<const ActivatedPrimitives> p)
      : registry_(r), id_(std::move(id)), prims_(std::move(p)) {}

  ModelRegistry* registry_ = nullptr;
  std::string id_;
  std::shared_ptr<const ActivatedPrimitives> prims_;
};

/// Thread-safe registry: lazy synchronous loading, reference counting and
/// inactivity eviction. Concurrent acquirers of one model share one load.
class ModelRegistry {
 public:
  using Loader = std::function<ActivatedPrimitives(const std::filesystem::path&)>;
  using NowFn = std::function<Clock::time_point()>;

  static ActivatedPrimitives default_loader(const std::filesystem::path& ply) {
    return activate(load_ply(ply));
  }

  explicit ModelRegistry(std::vector<ModelRecord> records,
                         std::chrono::duration<double> eviction_timeout = std::chrono::seconds(300),
                         Loader loader = default_loader, NowFn now = [] { return Clock::now(); })
      : timeout_(eviction_timeout), loader_(std::move(loader)), now_(std::move(now)) {
    for (auto& r : records) {
      r.state = ModelState::Unloaded;
      r.ref_count = 0;
      Entry e;
      e.record = std::move(r);
      entries_.emplace(e.record.id, std::move(e));
    }
  }

  ModelRegistry(const ModelRegistry&) = delete;
  ModelRegistry& operator=(const ModelRegistry&) = delete;

  std::chrono::duration<double> eviction_timeout() const { return timeout_; }
  Clock::time_point now() const { return now_(); }

  bool contains(const std::string& id) const {
    std::lock_guard lock(mutex_);
    return entries_.count(id) != 0;
  }

  /// Snapshot of all records in id order.
  std::vector<ModelRecord> records() const {
    std::lock_guard lock(mutex_);
    std::vector<ModelRecord> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) out.push_back(e.record);
    return out;
  }

  std::optional<ModelRecord> record(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.record;
  }

  /// Number of loads performed by the loader since construction.
  std::size_t load_count() const {
    std::lock_guard lock(mutex_);
    return loads_;
  }

  std::size_t loaded_count() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const auto& kv) {
      return kv.second.record.state == ModelState::Loaded;
    }));
  }

  ModelHandle acquire(const std::string& id) {
    std::unique_lock lock(mutex_);
    Entry& e = find_or_throw(id);
    while (true) {
      if (e.record.state == ModelState::Loading) {
        cv_.wait(lock);
        continue;
      }
      if (e.record.state == ModelState::Loaded) break;

      e.record.state = ModelState::Loading;
      const auto path = e.record.ply_path;
      lock.unlock();
      std::shared_ptr<const ActivatedPrimitives> loaded;
      std::string failure;
      try {
        loaded = std::make_shared<const ActivatedPrimitives>(loader_(path));
      } catch (const std::exception& ex) {
        failure = ex.what();
      }
      lock.lock();
      if (!loaded) {
        e.record.state = ModelState::Unloaded;
        cv_.notify_all();
        throw Error(ErrorKind::LoadFailed, id + ": " + failure);
      }
      e.prims = std::move(loaded);
      e.record.state = ModelState::Loaded;
      ++loads_;
      cv_.notify_all();
      break;
    }
    ++e.record.ref_count;
    e.record.last_access = now_();
    return ModelHandle(this, id, e.prims);
  }

  void release(const std::string& id) {
    std::lock_guard lock(mutex_);
    Entry& e = find_or_throw(id);
    if (e.record.ref_count == 0) {
      throw Error(ErrorKind::UnderflowRelease, "release of '" + id + "' with ref_count 0");
    }
    --e.record.ref_count;
    e.record.last_access = now_();
    if (e.record.ref_count == 0) cv_.notify_all();
  }

  /// Loads `id` if needed and leaves it resident with no references.
  ModelState load(const std::string& id) {
    ModelHandle h = acquire(id);
    h.reset();
    return ModelState::Loaded;
  }

  /// Unloads every Loaded model that is unreferenced and idle for longer
  /// than the timeout. The check and the unload happen under one lock.
  std::vector<std::string> evict_inactive(Clock::time_point now) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> evicted;
    for (auto& [id, e] : entries_) {
      auto& r = e.record;
      if (r.state != ModelState::Loaded || r.ref_count != 0) continue;
      if (now - r.last_access > timeout_) {
        e.prims.reset();
        r.state = ModelState::Unloaded;
        evicted.push_back(id);
      }
    }
    return evicted;
  }

  std::vector<std::string> evict_inactive() { return evict_inactive(now_()); }

  /// Waits for every outstanding reference to be released, then unloads all.
  void drain_and_unload() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] {
      return std::all_of(entries_.begin(), entries_.end(), [](const auto& kv) {
        return kv.second.record.ref_count == 0 && kv.second.record.state != ModelState::Loading;
      });
    });
    for (auto& [id, e] : entries_) {
      e.prims.reset();
      e.record.state = ModelState::Unloaded;
    }
  }

 private:
  struct Entry {
    ModelRecord record;
    std::shared_ptr<const ActivatedPrimitives> prims;
  };

  Entry& find_or_throw(const std::string& id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownModel, id);
    return it->second;
  }

  std::chrono::duration<double> timeout_;
  Loader loader_;
  NowFn now_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, Entry> entries_;
  std::size_t loads_ = 0;
};

inline void ModelHandle::reset() {
  if (registry_ != nullptr) {
    registry_->release(id_);
    registry_ = nullptr;
  }
  prims_.reset();
}

}  // namespace splatstream
