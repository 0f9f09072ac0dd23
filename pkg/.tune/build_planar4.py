import sys, time
sys.path.insert(0, 'tests')
import numpy as np
from neuralik.model import IkModel, ModelConfig
from neuralik.kinematics import preset_chain
from neuralik.training import generate_dataset, TrainConfig, train
from neuralik.evaluate import evaluate_iknet
from conftest import PLANAR4_PHASES

chain = preset_chain('planar4')
tr = generate_dataset(chain, 20000, 0)
te = generate_dataset(chain, 1000, 1)
model = IkModel(ModelConfig.for_chain(chain, 'desk'), np.random.default_rng([0, 0x111]))
for i, kw in enumerate(PLANAR4_PHASES):
    t0 = time.time()
    res = train(model, tr, TrainConfig(**kw))
    print(f'phase {i} time {time.time()-t0:.0f}s best val {res.best_val:.4f} at {res.best_epoch}', flush=True)
    model.save(f'.tune/planar4_p{i}.ckpt')
    if i >= 2:
        rep, _ = evaluate_iknet(model, chain, te.X, n_samples=100, threshold_cm=2.0,
                                rng=np.random.default_rng(7), with_ll=False)
        print(rep.to_json(), flush=True)
model.save('.cache/planar4_desk_s0.ckpt')
print('saved cache ckpt', flush=True)
