#pragma once

#include "panodepth/losses/common.hpp"
#include "panodepth/losses/df_gram.hpp"
#include "panodepth/losses/edges.hpp"
#include "panodepth/losses/mask.hpp"
#include "panodepth/losses/normal.hpp"
#include "panodepth/losses/pts.hpp"
#include "panodepth/losses/silog.hpp"
#include "panodepth/losses/total.hpp"
