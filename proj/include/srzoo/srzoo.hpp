#pragma once

#include "srzoo/analyze.hpp"
#include "srzoo/conv.hpp"
#include "srzoo/eval.hpp"
#include "srzoo/graph.hpp"
#include "srzoo/image_io.hpp"
#include "srzoo/models.hpp"
#include "srzoo/reparam.hpp"
#include "srzoo/resample.hpp"
#include "srzoo/serialize.hpp"
#include "srzoo/stats.hpp"
#include "srzoo/tensor.hpp"
