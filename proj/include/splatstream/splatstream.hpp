#pragma once

#include <splatstream/abr.hpp>
#include <splatstream/camera.hpp>
#include <splatstream/error.hpp>
#include <splatstream/gaussians.hpp>
#include <splatstream/image.hpp>
#include <splatstream/ladder.hpp>
#include <splatstream/metrics.hpp>
#include <splatstream/model_registry.hpp>
#include <splatstream/ply.hpp>
#include <splatstream/protocol.hpp>
#include <splatstream/renderer.hpp>
#include <splatstream/scene.hpp>
#include <splatstream/server.hpp>
#include <splatstream/session.hpp>
#include <splatstream/shaper.hpp>
#include <splatstream/traces.hpp>
