"""
Emotion classifier and its metrics
==================================

Six classes of band-limited noise stand in for the six emotions. Each clip is
pooled into an 80-value MFCC summary (per-coefficient mean and std) and fed
to the dense network.
"""

import numpy as np

from emostyle import classifier, synthetic
from emostyle.labels import Emotion

clips, labels = synthetic.class_clips(10, seed=0)
feats = np.array([classifier.featurize(c) for c in clips])
print("features:", feats.shape)

model, history = classifier.train_classifier((feats, labels), classifier.ClassifierConfig(epochs=100))
print("training accuracy after %d epochs: %.2f" % (len(history), history[-1].accuracy))

fresh, fresh_labels = synthetic.class_clips(10, seed=1)
rep = classifier.evaluate(model, (np.array([classifier.featurize(c) for c in fresh]), np.array(fresh_labels)))
print(classifier.format_table([("Held-out", rep)]))
print("confusion (rows true, columns predicted):")
print(rep.confusion)

# macro F1 averages over all six classes, so a class never predicted costs its share
only_sad = classifier.report(np.arange(6).repeat(5), np.full(30, int(Emotion.SAD)))
print("always 'sad': accuracy %.3f, macro F1 %.3f" % (only_sad.accuracy, only_sad.macro_f1))
