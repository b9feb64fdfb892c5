#pragma once

#include <cstddef>

namespace densecap {

// Desk-scale defaults. Paper-scale values for reference: EPN hidden 512,
// K 128, top_n 1000; ESGN hidden 512, L_loc 100; SCN hidden 512.
struct EpnConfig {
  int hidden = 32;     // per GRU layer; Vis(p) has 2 * hidden entries
  int K = 8;           // proposals scored per ending segment
  int top_n = 200;
  double nms_threshold = 0.8;
  int max_candidates = 32;  // M_max
  double init_range = 0.08;

  std::size_t vis_dim() const { return 2 * static_cast<std::size_t>(hidden); }
};

struct EsgnConfig {
  int hidden = 64;     // encoder GRU and pointer LSTM
  int loc_dim = 20;    // L_loc
  int attn_dim = 32;
  int max_events = 8;  // N_max
  double init_range = 0.08;
};

struct ScnConfig {
  int hidden = 64;     // episode and event LSTM (h_0^e = r needs equal widths)
  int embed_dim = 32;
  int attn_dim = 32;
  int gate_dim = 32;
  int max_len = 20;
  double temperature = 1.0;
  double init_range = 0.08;
};

struct ModelConfig {
  EpnConfig epn;
  EsgnConfig esgn;
  ScnConfig scn;
};

}  // namespace densecap
