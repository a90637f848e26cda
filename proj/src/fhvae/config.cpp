#include "zrs/fhvae/config.hpp"

#include "zrs/common.hpp"

namespace zrs {

std::string to_string(EncoderKind k) {
  return k == EncoderKind::kLstm ? "lstm" : "dense";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "lstm") return EncoderKind::kLstm;
  if (s == "dense") return EncoderKind::kDense;
  throw Error("unknown encoder kind '" + s + "'");
}

void FhvaeConfig::validate() const {
  if (z1_dim < 1 || z2_dim < 1) throw Error("fhvae: latent dims must be >= 1");
  if (num_layers < 1 || hidden_dim < 1) throw Error("fhvae: bad network size");
  if (segment_length < 1) throw Error("fhvae: segment_length must be >= 1");
  if (!(sigma2_mu2 > 0 && sigma2_z1 > 0 && sigma2_z2 > 0))
    throw Error("fhvae: prior variances must be > 0");
  if (!(alpha >= 0)) throw Error("fhvae: alpha must be >= 0");
  if (!(cv_fraction > 0 && cv_fraction < 1))
    throw Error("fhvae: cv_fraction must lie in (0, 1)");
  if (batch_size < 1 || max_epochs < 1 || patience < 0 || train_shift < 1 ||
      segments_per_epoch < 0)
    throw Error("fhvae: bad training schedule");
  if (!(clip_norm > 0)) throw Error("fhvae: clip_norm must be > 0");
  adam.validate();
}

void to_json(nlohmann::json& j, const FhvaeConfig& c) {
  j = {{"z1_dim", c.z1_dim},
       {"z2_dim", c.z2_dim},
       {"kind", to_string(c.kind)},
       {"num_layers", c.num_layers},
       {"hidden_dim", c.hidden_dim},
       {"segment_length", c.segment_length},
       {"sigma2_mu2", c.sigma2_mu2},
       {"sigma2_z1", c.sigma2_z1},
       {"sigma2_z2", c.sigma2_z2},
       {"alpha", c.alpha},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience},
       {"cv_fraction", c.cv_fraction},
       {"train_shift", c.train_shift},
       {"segments_per_epoch", c.segments_per_epoch},
       {"clip_norm", c.clip_norm},
       {"adam", c.adam},
       {"overlap_average", c.overlap_average},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, FhvaeConfig& c) {
  FhvaeConfig d;
  c.z1_dim = j.value("z1_dim", d.z1_dim);
  c.z2_dim = j.value("z2_dim", d.z2_dim);
  c.kind = encoder_kind_from_string(j.value("kind", to_string(d.kind)));
  c.num_layers = j.value("num_layers", d.num_layers);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.segment_length = j.value("segment_length", d.segment_length);
  c.sigma2_mu2 = j.value("sigma2_mu2", d.sigma2_mu2);
  c.sigma2_z1 = j.value("sigma2_z1", d.sigma2_z1);
  c.sigma2_z2 = j.value("sigma2_z2", d.sigma2_z2);
  c.alpha = j.value("alpha", d.alpha);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.patience = j.value("patience", d.patience);
  c.cv_fraction = j.value("cv_fraction", d.cv_fraction);
  c.train_shift = j.value("train_shift", d.train_shift);
  c.segments_per_epoch = j.value("segments_per_epoch", d.segments_per_epoch);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.adam = j.contains("adam") ? j.at("adam").get<nn::AdamConfig>() : d.adam;
  c.overlap_average = j.value("overlap_average", d.overlap_average);
  c.seed = j.value("seed", d.seed);
}

}  // namespace zrs
