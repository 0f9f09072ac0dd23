import numpy as np, time
from neuralik.model import IkModel
from neuralik.kinematics import preset_chain
from neuralik.training import generate_dataset, TrainConfig, train

chain = preset_chain('planar2')
tr = generate_dataset(chain, 20000, 0)
model = IkModel.load('.tune/planar2_e1100.ckpt')
cfg = TrainConfig(epochs=40, batch_size=2048, lr=3e-4, grad_clip=0.25,
                  plateau_patience=15, seed=4)
t0 = time.time()
res = train(model, tr, cfg)
print('train time', time.time()-t0, 'best val', res.best_val, 'at', res.best_epoch, flush=True)
for r in res.history: print(r, flush=True)
