import numpy as np, time
from neuralik.model import IkModel
from neuralik.kinematics import preset_chain
from neuralik.training import generate_dataset, TrainConfig, train
from neuralik.evaluate import evaluate_iknet

chain = preset_chain('planar2')
tr = generate_dataset(chain, 20000, 0)
te = generate_dataset(chain, 1000, 1)
model = IkModel.load('.tune/planar2_e200.ckpt')
cfg = TrainConfig(epochs=300, lr=2.5e-4, grad_clip=0.5, plateau_patience=25, seed=2)
t0 = time.time()
res = train(model, tr, cfg)
print('train time', time.time()-t0, 'best val', res.best_val, 'at', res.best_epoch, flush=True)
for r in res.history: print(r, flush=True)
model.save('.tune/planar2_e500.ckpt')
rep, _ = evaluate_iknet(model, chain, te.X, n_samples=100, threshold_cm=2.0,
                        rng=np.random.default_rng(2), with_ll=False)
print(rep.to_json(), flush=True)
