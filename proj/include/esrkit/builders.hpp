#pragma once

#include "esrkit/arch.hpp"

namespace esr {

// Challenge architectures, reconstructed at their published operating points.
// All emit x4 graphs (3 -> 3 channels). Distillation widths are clamped to
// channels/2 when the requested value does not fit a narrow build.

// Baseline: 8 information multi-distillation blocks, 4-stage channel split.
ArchSpec build_imdn(int channels = 64, int blocks = 8, int distill = 16,
                    double slope = 0.05);

// Residual feature distillation network with full ESA per block.
ArchSpec build_rfdn(int channels = 50, int blocks = 4, int distill = 25);

// Residual local feature network: distillation removed, simplified ESA.
ArchSpec build_rlfn(int channels = 48, int blocks = 4, int esa_channels = 16);

// ERB/HFAB stack. Train form carries tagged RepBlock branch groups and BN;
// deploy form is the plain-conv equivalent collapse_arch produces.
ArchSpec build_fmen(int pairs = 5, int channels = 50, int att_channels = 16,
                    bool deploy = false);

// Blueprint-separable network: every spatial conv inside an ESDB is a
// pointwise -> depthwise pair; per-ESDB learnable channel weighting.
ArchSpec build_bsrn(int esdb = 5, int channels = 48);

}  // namespace esr
