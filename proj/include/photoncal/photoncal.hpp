#pragma once

#include "photoncal/calibration.hpp"
#include "photoncal/calibration_io.hpp"
#include "photoncal/correction.hpp"
#include "photoncal/errors.hpp"
#include "photoncal/frame.hpp"
#include "photoncal/image.hpp"
#include "photoncal/keyvalue.hpp"
#include "photoncal/mask.hpp"
#include "photoncal/mosaic.hpp"
#include "photoncal/png.hpp"
#include "photoncal/segmentation.hpp"
#include "photoncal/simchip.hpp"
#include "photoncal/spectral.hpp"
#include "photoncal/spectrum_csv.hpp"
