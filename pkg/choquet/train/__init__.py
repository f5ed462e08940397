from choquet.train.gan import GanOutcome, init_generator, make_target, train_ct_gan, train_dominance_gan, train_wgan
from choquet.train.log import TrainLog
from choquet.train.portfolio import PortfolioOutcome, train_portfolio
from choquet.train.rates import RateResult, fit_loglog_slope, rate_experiment
