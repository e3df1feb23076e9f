"""
MelGAN-VC on two synthetic domains
==================================

Segments from a "low" domain (energy in the bottom mel bands) are translated
to a "high" domain. A small classifier trained on fresh draws of both domains
acts as the judge, the same way the emotion classifier judges converted clips.
"""

import numpy as np

from emostyle import classifier, melgan_vc, synthetic
from emostyle.labels import Emotion

SEG = 32

low = synthetic.band_segments(64, "low", 40, SEG, seed=1)
high = synthetic.band_segments(64, "high", 40, SEG, seed=2)

cfg = melgan_vc.MelganConfig(seg_frames=SEG, gen_updates_per_disc=3, epochs=1000, max_steps=500)
result = melgan_vc.train_pair(low, high, cfg, "happy", "sad")
print(f"{result.gen_updates} generator and {result.disc_updates} discriminator updates")
for h in result.history[:: len(result.history) // 5]:
    print(f"step {h.step:4d}  d {h.loss_d:.3f}  g {h.loss_g_adv:.3f}  travel {h.loss_travel:.3f}  margin {h.loss_margin:.3f}")


def pooled(segs):
    return np.array([classifier.featurize_mel(melgan_vc.unscale_db(s)) for s in segs])


# the judge: "happy" stands for low, "sad" for high
judge_low = synthetic.band_segments(64, "low", 40, SEG, seed=100)
judge_high = synthetic.band_segments(64, "high", 40, SEG, seed=101)
labels = np.array([int(Emotion.HAPPY)] * 64 + [int(Emotion.SAD)] * 64)
judge, _ = classifier.train_classifier(
    (pooled(np.concatenate([judge_low, judge_high])), labels), classifier.ClassifierConfig(epochs=50)
)

test = synthetic.band_segments(64, "low", 40, SEG, seed=3)
generated = melgan_vc.generate(result.model, test)
fraction, _ = classifier.judge_features(judge, pooled(generated), Emotion.SAD)
print(f"judged as high domain: {100 * fraction:.1f}%")

# energy should move from the lower to the upper half of the bands
half = 20
print("mean level, low half:  %.2f -> %.2f" % (test[:, :half].mean(), generated[:, :half].mean()))
print("mean level, high half: %.2f -> %.2f" % (test[:, half:].mean(), generated[:, half:].mean()))
