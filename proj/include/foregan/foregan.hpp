#pragma once

#include "foregan/checkpoint.hpp"
#include "foregan/config.hpp"
#include "foregan/data.hpp"
#include "foregan/gan.hpp"
#include "foregan/grad_check.hpp"
#include "foregan/image.hpp"
#include "foregan/inversion.hpp"
#include "foregan/mask.hpp"
#include "foregan/metrics.hpp"
#include "foregan/ops.hpp"
#include "foregan/segmentation.hpp"
#include "foregan/tensor.hpp"
