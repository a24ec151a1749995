#pragma once

#include "s2d/arith.hpp"
#include "s2d/bitio.hpp"
#include "s2d/container.hpp"
#include "s2d/error.hpp"
#include "s2d/image_io.hpp"
#include "s2d/keypoint_codec.hpp"
#include "s2d/keypoint_extractor.hpp"
#include "s2d/loss_eval.hpp"
#include "s2d/motion_engine.hpp"
#include "s2d/pipeline.hpp"
#include "s2d/rng.hpp"
#include "s2d/synthesis.hpp"
#include "s2d/tensor.hpp"
#include "s2d/unet.hpp"
#include "s2d/weights.hpp"
