from .buffer import ReplayBuffer
from .checkpoint import load_policies, save_policies
from .mlp import Adam, MlpParams, mlp_backward, mlp_forward
from .nashconv import NashConvResult, nashconv
from .networks import BuyerActor, Critic, SellerActor
from .td3 import PolicySet, TrainConfig, td3_update
from .train import PolicyStrategy, TrainResult, evaluate, train, write_curve_csv

__all__ = [
    "Adam", "BuyerActor", "Critic", "MlpParams", "NashConvResult", "PolicySet", "PolicyStrategy",
    "ReplayBuffer", "SellerActor", "TrainConfig", "TrainResult", "evaluate", "load_policies",
    "mlp_backward", "mlp_forward", "nashconv", "save_policies", "td3_update", "train",
    "write_curve_csv",
]
