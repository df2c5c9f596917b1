#pragma once

#include "c2w/numkernel.hpp"
#include "c2w/gru.hpp"
#include "c2w/utf8.hpp"
#include "c2w/random.hpp"
#include "c2w/vocab.hpp"
#include "c2w/data.hpp"
#include "c2w/model.hpp"
#include "c2w/train.hpp"
#include "c2w/checkpoint.hpp"
#include "c2w/eval.hpp"
#include "c2w/viz.hpp"
