#pragma once

#include <splatstream/camera.hpp>
#include <splatstream/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace splatstream {

inline constexpr int kMinRenderDim = 64;
inline constexpr int kMaxRenderDim = 4096;

/// Body of POST /render. Angles in degrees; intrinsics are for the
/// requested resolution.
struct RenderRequest {
  std::string model_id;
  double azimuth = 0.0;
  double elevation = 0.0;
  Vec3 translation{};
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  int jpeg_quality = 90;
  std::int64_t frame_id = 0;

  CameraPose pose() const { return CameraPose::from_degrees(azimuth, elevation, translation); }
  Intrinsics intrinsics() const { return {fx, fy, cx, cy, width, height}; }

  nlohmann::json to_json() const {
    return {{"model_id", model_id},
            {"azimuth", azimuth},
            {"elevation", elevation},
            {"translation", {translation.x, translation.y, translation.z}},
            {"fx", fx},
            {"fy", fy},
            {"cx", cx},
            {"cy", cy},
            {"width", width},
            {"height", height},
            {"jpeg_quality", jpeg_quality},
            {"frame_id", frame_id}};
  }
};

/// Field-level schema violation.
struct SchemaError {
  std::string field;
  std::string message;
};

namespace detail {

inline std::optional<SchemaError> read_number(const nlohmann::json& j, const char* key, double& out) {
  auto it = j.find(key);
  if (it == j.end()) return SchemaError{key, std::string(key) + " is required"};
  if (!it->is_number()) return SchemaError{key, std::string(key) + " must be a number"};
  out = it->get<double>();
  if (!std::isfinite(out)) return SchemaError{key, std::string(key) + " must be finite"};
  return std::nullopt;
}

template <class Int>
std::optional<SchemaError> read_integer(const nlohmann::json& j, const char* key, Int& out) {
  auto it = j.find(key);
  if (it == j.end()) return SchemaError{key, std::string(key) + " is required"};
  if (!it->is_number_integer()) return SchemaError{key, std::string(key) + " must be an integer"};
  out = it->get<Int>();
  return std::nullopt;
}

}  // namespace detail

/// Parses and validates a render request; on failure `error` names the
/// offending field.
inline std::optional<RenderRequest> parse_render_request(const std::string& body, SchemaError& error) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    error = {"body", "body is not valid JSON"};
    return std::nullopt;
  }
  if (!j.is_object()) {
    error = {"body", "body must be a JSON object"};
    return std::nullopt;
  }
  RenderRequest r;
  auto fail = [&error](SchemaError e) {
    error = std::move(e);
    return std::nullopt;
  };

  auto id = j.find("model_id");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty()) {
    return fail({"model_id", "model_id must be a non-empty string"});
  }
  r.model_id = id->get<std::string>();

  for (auto [key, dst] : {std::pair{"azimuth", &r.azimuth}, std::pair{"elevation", &r.elevation},
                          std::pair{"fx", &r.fx}, std::pair{"fy", &r.fy}, std::pair{"cx", &r.cx},
                          std::pair{"cy", &r.cy}}) {
    if (auto e = detail::read_number(j, key, *dst)) return fail(*e);
  }

  auto t = j.find("translation");
  if (t == j.end() || !t->is_array() || t->size() != 3 ||
      !std::all_of(t->begin(), t->end(), [](const auto& v) { return v.is_number(); })) {
    return fail({"translation", "translation must be an array of 3 numbers"});
  }
  r.translation = {(*t)[0].get<double>(), (*t)[1].get<double>(), (*t)[2].get<double>()};
  if (!std::isfinite(r.translation.x) || !std::isfinite(r.translation.y) || !std::isfinite(r.translation.z)) {
    return fail({"translation", "translation must be finite"});
  }

  if (auto e = detail::read_integer(j, "width", r.width)) return fail(*e);
  if (auto e = detail::read_integer(j, "height", r.height)) return fail(*e);
  if (auto e = detail::read_integer(j, "jpeg_quality", r.jpeg_quality)) return fail(*e);
  if (auto e = detail::read_integer(j, "frame_id", r.frame_id)) return fail(*e);

  const std::string dims = "[" + std::to_string(kMinRenderDim) + ", " + std::to_string(kMaxRenderDim) + "]";
  if (r.width < kMinRenderDim || r.width > kMaxRenderDim) return fail({"width", "width must be within " + dims});
  if (r.height < kMinRenderDim || r.height > kMaxRenderDim) return fail({"height", "height must be within " + dims});
  if (r.jpeg_quality < 1 || r.jpeg_quality > 100) return fail({"jpeg_quality", "jpeg_quality must be within [1, 100]"});
  if (!(r.fx > 0)) return fail({"fx", "fx must be positive"});
  if (!(r.fy > 0)) return fail({"fy", "fy must be positive"});
  if (r.cx < 0 || r.cx > r.width) return fail({"cx", "cx must be within [0, width]"});
  if (r.cy < 0 || r.cy > r.height) return fail({"cy", "cy must be within [0, height]"});
  return r;
}

}  // namespace splatstream
